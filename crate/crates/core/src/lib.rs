//! Foreground extraction from cluttered images.
//!
//! The image is segmented at several reduced resolutions, the candidate with
//! the largest maxmin-cut score is picked, its boundary is widened into a
//! trimap, closed-form matting labels the unknown band, and a final
//! figure-ground pass removes stray fragments.

pub mod bench;
pub mod error;
pub mod figureground;
pub mod imaging;
pub mod io;
pub mod matting;
pub mod multires;
pub mod solver;
pub mod sparse;
pub mod superpixel;
pub mod trimap;

pub use error::{Error, Result};
pub mod fixtures;
pub mod pipeline;
