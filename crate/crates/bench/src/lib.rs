//! Shared fixtures for the criterion benches.

use blognet::graph::BlogNetwork;
use blognet::netgen::{generate_pa_network, GenParams};

/// Standard preferential-attachment benchmark network.
pub fn bench_network(n: usize) -> BlogNetwork {
    generate_pa_network(&GenParams::new(n, 3, 7)).expect("valid params")
}
