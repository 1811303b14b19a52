#![allow(dead_code)]

pub mod cascade_suite;
pub mod gradcheck;
pub mod recos_props;
