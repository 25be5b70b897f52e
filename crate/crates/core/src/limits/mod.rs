//! Large-population limits of the stationary law.

pub mod density;
pub mod fixed_point;
pub mod predict;
pub mod product;

pub use density::{limit_density_lambda1, limit_density_sampled, LimitDensity};
pub use fixed_point::{qstar_m, solve_qstar_lambda0, solve_qstar_lambda_mid, FixedPoint};
pub use predict::{predict_limit, LimitPrediction, LimitProblem, MarginalPrediction, PriorScaling, Regime};
pub use product::{product_limit_k2l2, HessianReport, ProductObjective, ProductRegime};
