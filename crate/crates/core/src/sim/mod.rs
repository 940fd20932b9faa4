//! Population models, samplers and Monte Carlo drivers.

mod mc;
mod model;

pub use mc::{
    cell_tag, collect_spike_statistics, oracle_config, replicate_rng, replicate_spectrum, run_noise_mc,
    run_size_power, run_smallest_roots_size, splitmix64, BetaPolicy, CellOutcome, Experiment, McCell, McResult,
    RejectionRate, NOMINAL_LEVEL,
};
pub use model::{
    draw_sample, generate_population, haar_orthogonal, ModelKind, Population, PopulationModel, SamplerKind,
    MODEL_SPIKES,
};
