#![allow(dead_code)]

pub mod moment_quadrature;
