//! Distributed-SVM benchmark: data generation, problem construction,
//! classifier evaluation and the replication suite.

mod suite;
mod svm;

pub use suite::{
    averaged_curve, consensus_classifier, oracle_classifier, run_experiment_suite, spearman_rho,
    BoundaryRow, RunLine, SuiteRun, SuiteSummary, SvmSuite, SvmSuiteConfig,
};
pub use svm::{
    build_svm_instance, evaluate_classifier, generate_svm_data, partition_train, Split,
    SvmDataset, SAMPLES, TRAIN,
};
