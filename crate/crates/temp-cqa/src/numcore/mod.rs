//! Dense vector/matrix arithmetic with reverse-mode differentiation.
//!
//! Generic over the scalar type via [`Scalar`]; the crate root pins f64
//! aliases for the model code.

mod error;
pub mod fd;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use error::{NumError, NumResult};
pub use params::{InitScheme, ParamSpec, ParameterStore};
pub use scalar::Scalar;
pub use tape::{concat_cols, concat_rows, min_list, softmax_list, Tape, Var};
pub use tensor::Tensor;
