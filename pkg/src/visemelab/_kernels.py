"""Hot loops for HMM training and decoding, compiled with numba.

All computations run in log space. Chains are strict left-to-right:
state j allows a self-loop and an advance to j+1; the advance out of the
final state is the exit arc. `logb` is the (frames x states) emission
log-density table for one composite chain.
"""

import numpy as np
from numba import njit

NEG = -np.inf


@njit(cache=True)
def chain_forward(logb, log_self, log_adv):
    T, S = logb.shape
    alpha = np.full((T, S), NEG)
    alpha[0, 0] = logb[0, 0]
    for t in range(1, T):
        for j in range(S):
            stay = alpha[t - 1, j] + log_self[j]
            if j > 0:
                enter = alpha[t - 1, j - 1] + log_adv[j - 1]
                best = np.logaddexp(stay, enter)
            else:
                best = stay
            alpha[t, j] = best + logb[t, j]
    ll = alpha[T - 1, S - 1] + log_adv[S - 1]
    return alpha, ll


@njit(cache=True)
def chain_backward(logb, log_self, log_adv):
    T, S = logb.shape
    beta = np.full((T, S), NEG)
    beta[T - 1, S - 1] = log_adv[S - 1]
    for t in range(T - 2, -1, -1):
        for j in range(S - 1, -1, -1):
            stay = log_self[j] + logb[t + 1, j] + beta[t + 1, j]
            if j + 1 < S:
                move = log_adv[j] + logb[t + 1, j + 1] + beta[t + 1, j + 1]
                beta[t, j] = np.logaddexp(stay, move)
            else:
                beta[t, j] = stay
    return beta


@njit(cache=True)
def chain_occupancy(logb, alpha, beta, ll, log_self, log_adv):
    """State posteriors plus expected self/advance arc counts."""
    T, S = logb.shape
    gamma = np.zeros((T, S))
    self_counts = np.zeros(S)
    adv_counts = np.zeros(S)
    for t in range(T):
        for j in range(S):
            v = alpha[t, j] + beta[t, j] - ll
            gamma[t, j] = np.exp(v)
    for t in range(T - 1):
        for j in range(S):
            self_counts[j] += np.exp(alpha[t, j] + log_self[j] + logb[t + 1, j] + beta[t + 1, j] - ll)
            if j + 1 < S:
                adv_counts[j] += np.exp(alpha[t, j] + log_adv[j] + logb[t + 1, j + 1] + beta[t + 1, j + 1] - ll)
    adv_counts[S - 1] += np.exp(alpha[T - 1, S - 1] + log_adv[S - 1] - ll)
    return gamma, self_counts, adv_counts


@njit(cache=True)
def chain_viterbi(logb, log_self, log_adv):
    T, S = logb.shape
    delta = np.full((T, S), NEG)
    psi = np.zeros((T, S), dtype=np.int32)
    delta[0, 0] = logb[0, 0]
    for t in range(1, T):
        for j in range(S):
            stay = delta[t - 1, j] + log_self[j]
            best = stay
            arg = j
            if j > 0:
                enter = delta[t - 1, j - 1] + log_adv[j - 1]
                if enter > stay:
                    best = enter
                    arg = j - 1
            delta[t, j] = best + logb[t, j]
            psi[t, j] = arg
    ll = delta[T - 1, S - 1] + log_adv[S - 1]
    path = np.zeros(T, dtype=np.int32)
    path[T - 1] = S - 1
    for t in range(T - 1, 0, -1):
        path[t - 1] = psi[t, path[t]]
    return ll, path


@njit(cache=True)
def network_scores(logb_states, state_index, starts, lengths, log_self, log_adv):
    """Best-path score of each left-to-right chain in a word network.

    logb_states: (T, n_model_states) emission table shared by all chains;
    state_index maps concatenated chain positions to its columns.
    """
    T = logb_states.shape[0]
    C = starts.shape[0]
    out = np.full(C, NEG)
    for c in range(C):
        S = lengths[c]
        if S > T:
            continue
        base = starts[c]
        prev = np.full(S, NEG)
        cur = np.full(S, NEG)
        prev[0] = logb_states[0, state_index[base]]
        for t in range(1, T):
            for j in range(S):
                stay = prev[j] + log_self[base + j]
                if j > 0:
                    enter = prev[j - 1] + log_adv[base + j - 1]
                    if enter > stay:
                        stay = enter
                cur[j] = stay + logb_states[t, state_index[base + j]]
            for j in range(S):
                prev[j] = cur[j]
        out[c] = prev[S - 1] + log_adv[base + S - 1]
    return out


@njit(cache=True)
def embedded_pass(gm_const, gm_means, gm_inv_var, log_self, log_adv,
                  frames, frame_start, frame_end, trans_flat, trans_ptr,
                  acc_occ, acc_x, acc_x2, self_buf, adv_buf, lls):
    """One Baum-Welch accumulation pass over a whole corpus.

    Model parameters are packed per label index: gm_const (L, S, K) holds
    log weight plus the Gaussian normaliser, gm_means and gm_inv_var are
    (L, S, K, D). Emission densities are computed on the fly for each
    utterance's own labels only. Accumulates component occupancies and
    weighted first/second moments, plus self/advance arc counts; writes
    per-utterance log-likelihoods and returns their total.
    """
    U = trans_ptr.shape[0] - 1
    L, S, K, D = gm_means.shape
    total = 0.0
    for u in range(U):
        f0, f1 = frame_start[u], frame_end[u]
        p0, p1 = trans_ptr[u], trans_ptr[u + 1]
        T = f1 - f0
        nl = p1 - p0
        stot = nl * S
        comp = np.empty((T, stot, K))
        logb = np.empty((T, stot))
        ls = np.empty(stot)
        la = np.empty(stot)
        for i in range(nl):
            lab = trans_flat[p0 + i]
            for s in range(S):
                j = i * S + s
                ls[j] = log_self[lab, s]
                la[j] = log_adv[lab, s]
                for t in range(T):
                    mx = NEG
                    for k in range(K):
                        quad = 0.0
                        for d in range(D):
                            diff = frames[f0 + t, d] - gm_means[lab, s, k, d]
                            quad += diff * diff * gm_inv_var[lab, s, k, d]
                        v = gm_const[lab, s, k] - 0.5 * quad
                        comp[t, j, k] = v
                        if v > mx:
                            mx = v
                    acc = 0.0
                    for k in range(K):
                        acc += np.exp(comp[t, j, k] - mx)
                    logb[t, j] = mx + np.log(acc)
        alpha, ll = chain_forward(logb, ls, la)
        beta = chain_backward(logb, ls, la)
        gamma, self_c, adv_c = chain_occupancy(logb, alpha, beta, ll, ls, la)
        lls[u] = ll
        total += ll
        for i in range(nl):
            lab = trans_flat[p0 + i]
            for s in range(S):
                j = i * S + s
                self_buf[lab, s] += self_c[j]
                adv_buf[lab, s] += adv_c[j]
                for t in range(T):
                    g = gamma[t, j]
                    if g > 0.0:
                        b = logb[t, j]
                        for k in range(K):
                            r = g * np.exp(comp[t, j, k] - b)
                            if r > 0.0:
                                acc_occ[lab, s, k] += r
                                for d in range(D):
                                    x = frames[f0 + t, d]
                                    acc_x[lab, s, k, d] += r * x
                                    acc_x2[lab, s, k, d] += r * x * x
    return total


@njit(cache=True)
def network_scores_batch(logb_states, frame_start, frame_end,
                         state_index, starts, lengths, log_self, log_adv):
    """network_scores over many utterances sharing one emission table."""
    U = frame_start.shape[0]
    C = starts.shape[0]
    out = np.full((U, C), NEG)
    for u in range(U):
        sub = logb_states[frame_start[u]:frame_end[u]]
        out[u] = network_scores(sub, state_index, starts, lengths, log_self, log_adv)
    return out


@njit(cache=True)
def loop_viterbi(logb, offsets, log_self, log_adv, log_loop):
    """Viterbi over a uniform loop of left-to-right model chains.

    logb: (T, SM) emissions for every model state; offsets[m]..offsets[m+1]
    delimit model m's states. Negative psi entries mark loop arcs (from a
    model exit back into an entry state): pred = ~psi.
    """
    T, SM = logb.shape
    M = offsets.shape[0] - 1
    delta = np.full((T, SM), NEG)
    psi = np.zeros((T, SM), dtype=np.int32)
    for m in range(M):
        e = offsets[m]
        delta[0, e] = log_loop + logb[0, e]
    for t in range(1, T):
        best_exit = NEG
        arg_exit = -1
        for m in range(M):
            last = offsets[m + 1] - 1
            v = delta[t - 1, last] + log_adv[last]
            if v > best_exit:
                best_exit = v
                arg_exit = last
        for m in range(M):
            for j in range(offsets[m], offsets[m + 1]):
                stay = delta[t - 1, j] + log_self[j]
                best = stay
                arg = j
                if j > offsets[m]:
                    enter = delta[t - 1, j - 1] + log_adv[j - 1]
                    if enter > best:
                        best = enter
                        arg = j - 1
                if j == offsets[m] and arg_exit >= 0:
                    reenter = best_exit + log_loop
                    if reenter > best:
                        best = reenter
                        arg = ~arg_exit
                delta[t, j] = best + logb[t, j]
                psi[t, j] = arg
    ll = NEG
    end = -1
    for m in range(M):
        last = offsets[m + 1] - 1
        v = delta[T - 1, last] + log_adv[last]
        if v > ll:
            ll = v
            end = last
    path = np.zeros(T, dtype=np.int32)
    bounds = np.zeros(T, dtype=np.int32)
    path[T - 1] = end
    for t in range(T - 1, 0, -1):
        p = psi[t, path[t]]
        if p < 0:
            bounds[t] = 1
            p = ~p
        path[t - 1] = p
    return ll, path, bounds
