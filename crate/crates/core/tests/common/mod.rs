#![allow(dead_code)]

pub mod dip_oracle;
pub mod lp;
pub mod scenes;
