pub mod agrlearn;
pub mod data;
pub mod harness;
pub mod ib;
pub mod mine;
pub mod nn;
pub mod prob;
pub mod seed;
pub mod quantizer;
pub mod typicality;
