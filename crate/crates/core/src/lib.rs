//! Traffic-sign classification with HOG descriptors and RBF support vector
//! machines.
//!
//! Images flow through [`imgcore`] (decoding, resizing, colour spaces, blur),
//! optional contrast and colour stages in [`enhance`] and [`pipeline`], and
//! into [`hog`] descriptors. [`svm`] trains one-vs-one classifiers on those
//! descriptors, [`tuning`] searches (C, gamma) by cross-validation and
//! [`metrics`] scores predictions. [`dataset`] reads the GTSRB layout.

pub mod dataset;
pub mod enhance;
pub mod hog;
pub mod imgcore;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod svm;
pub mod tuning;
