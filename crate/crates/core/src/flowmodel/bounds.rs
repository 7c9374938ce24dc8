use super::network::FlowNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    /// Rounds after which the estimate equals a unique optimum.
    Convergence,
    /// Rounds used by the uniqueness test.
    Uniqueness,
}

/// Round counts derived from `n` and `c_max`. The convergence bound uses
/// `(n−1)·c_max` for the longest residual path cost and 1 for the minimum
/// cycle gap. Saturates at `u64::MAX`.
pub fn iteration_bound(network: &FlowNetwork, mode: BoundMode) -> u64 {
    let n = network.node_count() as u128;
    let c = network.c_max().to_i128().map_or(u128::MAX, |c| c as u128);
    let value = match mode {
        BoundMode::Uniqueness => n.saturating_mul(n).saturating_mul(c).saturating_add(n),
        BoundMode::Convergence => (n.saturating_sub(1).saturating_mul(c) / 2 + 1).saturating_mul(n),
    };
    u64::try_from(value).unwrap_or(u64::MAX)
}
