pub mod annulus;
pub mod calc;
pub mod dangelo;
pub mod df_index;
pub mod distributions;
pub mod examples;
pub mod extreal;
pub mod gauge;
pub mod hypersurface;
pub mod optim;
mod par;
