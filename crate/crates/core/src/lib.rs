//! Deterministic simulation and analysis library for multi-camera
//! collaborative perception over constrained wireless links.
//!
//! A fleet of ground cameras observes moving targets in a rectangular arena
//! and streams features to an edge server over bandwidth-limited, lossy
//! radio links. The library models every stage of that loop:
//!
//! * [`channel`] — path loss, shadowing, interference, link capacity,
//!   transmission delay and i.i.d. packet loss.
//! * [`scenario`] — seeded synthetic worlds: target arrivals, dwell times,
//!   random-walk motion, per-identity appearance descriptors and the
//!   phase process (idle / calibrating / streaming) driven by target
//!   presence.
//! * [`calib`] — camera geometry, descriptor matching under a feature
//!   bit-budget, ground-plane homography estimation and extrinsics
//!   recovery, plus the error metrics used to score a recovered pose.
//! * [`age`] — information-freshness metrics: the classic age of
//!   information for a single periodically-sampled link and the
//!   target-count-weighted, fleet-level variant used to score the whole
//!   perception system, including its calibration/streaming cycle form.
//! * [`sched`] — grid-search solvers that pick bandwidth, packet size and
//!   update intervals to trade freshness against a rate–accuracy proxy,
//!   both per phase and jointly.
//! * [`fusion`] — synthetic bird's-eye-view feature maps, priority-based
//!   masking of lossy views, ground-plane fusion, peak detection and the
//!   MODA detection-accuracy score.
//!
//! Everything is reproducible: every stochastic routine takes either an
//! explicit RNG or a seed, and identical seeds yield identical results,
//! including across repeated runs of the bundled sweep drivers.

pub mod age;
pub mod calib;
pub mod channel;
pub mod fusion;
pub mod scenario;
pub mod sched;
pub mod seeding;
