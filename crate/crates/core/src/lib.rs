//! Significance testing for high-dimensional, low-sample size data where only
//! some of the class labels are observed.
//!
//! The crate provides three simulation- or permutation-based tests that share
//! one vocabulary:
//!
//! * [`engines::sigpal`] completes the missing labels with a semi-supervised
//!   assigner, scores the result with the 2-means [cluster
//!   index](cluster_index::cluster_index) and compares it against Gaussian
//!   null data that is randomly relabeled in the same proportions;
//! * [`engines::sigclust`] is the label-free special case;
//! * [`engines::diproperm`] is the fully labeled direction-projection
//!   permutation test.
//!
//! Supporting pieces are the eigen-spectrum estimators in [`spectral`], the
//! closed-form population cluster index in [`theory`], and the simulation
//! harness in [`sim`]. The `book/` directory next to this crate walks through
//! each concept with runnable snippets; those snippets are compiled and run
//! as doc-tests of this crate.
//!
//! ```
//! use sigpal::prelude::*;
//!
//! let spec = GeneratorSpec::mixture_one_direction(40, 50, 1.0, 1, 3.0, 10);
//! let (data, _truth) = gen_mixture(&spec, Seed(1)).unwrap();
//! let cfg = SimulationTestConfig {
//!     n_sim: 20,
//!     ..SimulationTestConfig::new(AssignerSpec::new(AssignerKind::CopKmeans))
//! };
//! let result = sigpal(&data, &cfg, Seed(7)).unwrap();
//! assert!(result.p_value <= 1.0);
//! ```

pub mod assigners;
pub mod cli;
pub mod cluster_index;
pub mod dataset;
pub mod engines;
pub mod error;
pub mod sim;
pub mod spectral;
pub mod stream;
pub mod theory;

mod linalg;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::assigners::{
        assign, assign_by_direction, cop_kmeans, derive_constraints, l1_lda_fit, s3lda_fit, two_means, AssignerKind,
        AssignerSpec, Constraints, Direction,
    };
    pub use crate::cluster_index::{brute_force_min_ci, cluster_index, Cluster, ClusterAssignment};
    pub use crate::dataset::{center, load_csv, rotate_to_diagonal, Label, LabelColumn, PartiallyLabeledDataset};
    pub use crate::engines::{
        diproperm, empirical_pvalue, sigclust, sigpal, Comparison, DiPropermConfig, DirectionKind, Method,
        SimulationTestConfig, Statistic, TestResult,
    };
    pub use crate::error::{Error, Result};
    pub use crate::sim::{gen_mixture, gen_one_cluster, run_experiment, GeneratorSpec, MethodConfig};
    pub use crate::spectral::{EigenMethod, EigenSpectrum};
    pub use crate::stream::Seed;
    pub use crate::theory::{tci_difference, tci_sigclust, tci_sigpal};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cluster-index.md")]
    mod cluster_index {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/assigners.md")]
    mod assigners {}
    #[doc = include_str!("../../../book/src/tests.md")]
    mod tests {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/simulations.md")]
    mod simulations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
