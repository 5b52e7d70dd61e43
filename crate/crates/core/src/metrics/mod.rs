//! Fairness and utility metrics for link prediction.

pub mod assortativity;
pub mod bias;
pub mod classifier;
pub mod diagnostics;
pub mod fairness;
pub mod linkpred;
pub mod report;

pub use assortativity::{assortativity, mixing_matrix, Assortativity};
pub use bias::{dyadic_rb, dyadic_rb_from_features, representation_bias, stratified_split};
pub use classifier::{loss_and_gradient, train_classifier, ClassifierConfig, LinearClassifier};
pub use diagnostics::{assumption_diagnostics, wilson_interval, Diagnostics};
pub use fairness::{dber, ddi, min_dber_bruteforce, xor_conditional_joints, DyadicSample};
pub use linkpred::{link_prediction_eval, LinkPrediction};
pub use report::{aggregate, min_dber_bound, AggregateReport, MetricsReport, Summary};
