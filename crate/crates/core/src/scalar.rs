//! Numeric bounds for the algorithm kernels.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, NumCast, PrimInt, Unsigned};

/// Integer type holding a Hamming distance.
pub trait Distance: PrimInt + Unsigned + NumCast + Debug + Default + Send + Sync + 'static {}

impl<T> Distance for T where T: PrimInt + Unsigned + NumCast + Debug + Default + Send + Sync + 'static {}

/// Floating point type used for layout coordinates and edge lengths.
pub trait Coord: Float + FloatConst + Debug + Send + Sync + 'static {}

impl<T> Coord for T where T: Float + FloatConst + Debug + Send + Sync + 'static {}
