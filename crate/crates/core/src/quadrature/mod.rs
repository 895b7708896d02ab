pub mod adaptive;
pub mod gauss;
pub mod heisenberg;
pub mod sphere_rule;

pub use adaptive::{AdaptiveOptions, Estimate};
pub use heisenberg::{
    heisenberg_integral, heisenberg_integral_pointwise, sphere_volume, unit_sphere_area,
};
pub use sphere_rule::SphereRule;
