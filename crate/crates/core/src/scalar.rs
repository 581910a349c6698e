//! Floating-point scalar used by the statistics layer.
//!
//! Hop counts, cycles and event counters are integers everywhere; only the
//! derived averages, rates and energy figures are generic.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Serialize + DeserializeOwned + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float type")
    }

    fn count(n: u64) -> Self {
        Self::from_u64(n).expect("integer converts to any float type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
