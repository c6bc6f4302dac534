use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the lattice model and sampler are generic over.
///
/// Implemented for `f32` and `f64`. Everything that involves the incomplete
/// beta function or random draws needs a real floating type; the recommender
/// only needs ordered field arithmetic and also accepts exact rationals.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Uniform draw on [0, 1) built from the generator's raw bits.
    fn unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f64 {
    #[inline]
    fn unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    #[inline]
    fn unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}
