//! Simulation-trained nearest-neighbour predictor and its evaluation harness.

mod dataset;
mod features;
mod knn;
mod metrics;

pub use dataset::{
    evaluate_flowwise, evaluate_stationwise, read_dataset, samples_from_records, train_and_evaluate, write_dataset,
    MapeTable, RoutingCase, Sample, TrainEvalReport, TrainSettings, LABEL_COLUMN,
};
pub use features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES, LAB_ROUTE_INDEX, SCHEMA_VERSION};
pub use knn::{KnnModel, MinMaxScaler};
pub use metrics::{iqr_keep, mape, mean_sd, quantile_sorted, train_test_split};
