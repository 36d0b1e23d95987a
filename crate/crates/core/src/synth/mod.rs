//! Synthetic data generators with known ground truth.

mod market;
mod panel;

pub use market::{generate_hourly, MarketFiles, MeritOrderConfig, RenewableProfile, SyntheticMarket};
pub use panel::{
    generate_panel, reference_coefficients, DgpConfig, PenetrationProcess, SyntheticPanel, Truth, SOLAR_REFERENCE,
    WIND_REFERENCE,
};
