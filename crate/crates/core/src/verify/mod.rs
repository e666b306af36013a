//! Lemma suites and trajectory monitors.

pub mod gradient;
pub mod lemmas;
pub mod monitors;
pub mod residual;

pub use gradient::{gradient_inequality_monitor, GradientReport};
pub use lemmas::{all_suites, lemma_cest_suite, lemma_pinch_suite, maclaurin_suite, traceless_suite, LemmaReport};
pub use monitors::{
    pinching_monitors, smoczyk_monitor, speed_lowerbound_fit, tso_monitor, tso_series, PinchingReport, SmoczykReport,
    SpeedFit, TsoReport, TsoWindow,
};
pub use residual::{curve_evolution_residual, Quantity, ResidualReport};
