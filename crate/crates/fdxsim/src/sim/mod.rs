//! Simulation harness: config, trials, sweeps, CSV.
