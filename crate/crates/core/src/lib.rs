//! Graph canonization and universal (label-based) canonization as positional
//! encodings for message-passing networks, with the tooling to measure their
//! expressivity and stability.

pub mod canon;
pub mod cli;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod features;
pub mod graph;
pub mod mpnn;
pub mod probe;
pub mod ugc;
pub mod wl;

pub use canon::{
    canonical_form, canonical_form_with, certificate_for_colouring, is_rigid, isomorphic, isomorphic_with, refine,
    CanonOptions, CanonResult, Certificate, Colouring,
};
pub use dataset::{load_dataset, load_edge_list, parse_edge_list, save_dataset, GraphDataset};
pub use distance::{graph_distance, stability_ratio, AlignmentResult, DistanceMode};
pub use error::{Error, Result};
pub use features::{concat_features, one_hot_colors, one_hot_ranks, FeatureTensor};
pub use graph::{apply_permutation, ColoredGraph, ColouringMode, DiscreteColouring, Permutation, Target};
pub use mpnn::{ModelInput, MpnnConfig, MpnnModel, Readout};
pub use ugc::{build_universe, validate_ugc, LabelUniverse, UgcValidationReport, UgcWitness};
pub use wl::{csl_benchmark, gen_csl, gen_wl_hard_pair, wl_test, PeKind, WlVerdict};
