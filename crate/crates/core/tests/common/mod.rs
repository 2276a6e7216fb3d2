pub mod oracles;
pub mod story;
