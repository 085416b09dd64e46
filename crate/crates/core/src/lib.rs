//! Core machinery for building sinkless-orientation lower-bound instances in the
//! online-LOCAL model: label strings and their substring order, construction
//! trees, the layer-doubling transformation, the auxiliary edge labelings, the
//! marked-tree builder with its reflect/split operations, a faithful
//! online-LOCAL simulator, and the adaptive adversary.

pub mod adversary;
pub mod algorithms;
pub mod canon;
pub mod ctree;
pub mod ftree;
pub mod label;
pub mod labelings;
pub mod marked;
pub mod olocal;
pub mod tower;

pub use label::{Label, PaddedLabel};
