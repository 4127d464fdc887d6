//! Running designed filters over signals, images and frame streams.

mod image;
pub mod io;
mod state;

pub use self::image::{
    filter_image_separable, filter_time_stack, Axis, FrameStream, Image, TemporalFilter,
};
pub use state::{filter_causal, filter_noncausal, filter_signal, FilterState, Priming};
