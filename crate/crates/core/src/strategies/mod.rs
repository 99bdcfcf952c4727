mod blocks;
mod builders;
mod constraints;
mod covariance;

pub use blocks::{block_shape, label_digits, ChoiBlocks};
pub use builders::{
    build, build_adaptive, build_causal, build_parallel, extract_storage, BuildOptions, CausalPath,
    CovarianceMode, StrategyKind, StrategyModel,
};
pub use constraints::{LinearMap, MatrixEquality, RowLowering, RowSpace, WireMap};
pub use covariance::{
    collective_generator, commutant_subspace, compute_commutant, covariance_constraints,
    covariance_generators, covariance_residual, hermitian_basis, weight_classes,
};
