pub mod annotations;
pub mod blend;
pub mod detect;
pub mod evaluate;
pub mod pipeline;
pub mod synth;
