pub mod fit;
pub mod mc;
pub mod price;
pub mod simulate;
pub mod transform;
