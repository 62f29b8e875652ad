pub mod analyze;
pub mod fit;
pub mod forecast;
pub mod networks;
pub mod simulate;
