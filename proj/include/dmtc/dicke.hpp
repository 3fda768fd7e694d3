// dicke.hpp — Collective-spin (Dicke) ladder data for permutation-invariant
// master-equation evolution of identical-frequency emitter bins.
//
// States of one bin of n spins are labelled (j, e) with 2j in allowed_twice_j
// and excitation e = m + n/2 in [n/2 - j, n/2 + j]. Permutation-invariant
// density operators are block diagonal over j with all multiplicity copies
// carrying equal weight; entries are stored per copy.

#pragma once

#include <cstdint>
#include <vector>

namespace dmtc::dicke {

// Multiplicity d^n_j of the spin-j irrep in n spins (0 when not present).
std::uint64_t multiplicity(int n_spins, int twice_j);

// 2j values present in n spins: n, n-2, ..., down to 1 or 0.
std::vector<int> allowed_twice_j(int n_spins);

// J^- matrix element <j, e-1| J^- |j, e> = sqrt(j(j+1) - m(m-1)), m = e - n/2.
double lowering_element(int n_spins, int twice_j, int e);

// One factored channel of the local-decay superoperator sum_i sigma_i . sigma_i^dag
// restricted to invariant operators: the map rho_j -> X rho_j X^T with
// X[(j_to, e-1), (j, e)] = amp[e]. Summing X rho X^T over all channels (and
// adding the diagonal loss -1/2 {sum_i sigma_i^dag sigma_i, .}) gives the exact
// invariant-sector action with per-copy normalization.
struct TransferChannel {
    int twice_j_to = 0;
    std::vector<double> amp;  // indexed by source excitation e in [0, n_spins]
};

std::vector<TransferChannel> local_decay_channels(int n_spins, int twice_j_from);

}  // namespace dmtc::dicke
