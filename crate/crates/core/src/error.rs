use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{format}: bad magic at offset 0")]
    BadMagic { format: &'static str },

    #[error("{format}: unsupported version {version} at offset 4")]
    UnsupportedVersion { format: &'static str, version: u16 },

    #[error("{format}: truncated {chunk} chunk at offset {offset}")]
    Truncated {
        format: &'static str,
        chunk: &'static str,
        offset: usize,
    },

    #[error("{format}: invalid {chunk} chunk at offset {offset}: {reason}")]
    Malformed {
        format: &'static str,
        chunk: &'static str,
        offset: usize,
        reason: String,
    },

    #[error("{format}: {count} trailing bytes at offset {offset}")]
    TrailingBytes {
        format: &'static str,
        count: usize,
        offset: usize,
    },

    #[error("side-info length mismatch: {side} entries for {symbols} symbols")]
    SideInfoLength { side: usize, symbols: usize },

    #[error("non-positive scale {value} at index {index}")]
    NonPositiveScale { index: usize, value: f64 },

    #[error("shape {height}x{width}x{channels} does not match {len} symbols")]
    ShapeMismatch {
        height: u32,
        width: u32,
        channels: u32,
        len: usize,
    },

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("zero total mass on support [{min}, {max}]")]
    ZeroMass { min: i32, max: i32 },

    #[error("symbol {symbol} at position {position} is outside support [{min}, {max}] of table {table}")]
    OutOfSupport {
        symbol: i32,
        position: usize,
        table: usize,
        min: i32,
        max: i32,
    },

    #[error("table index {table} at position {position} is out of range ({count} tables)")]
    BadTableIndex {
        table: usize,
        position: usize,
        count: usize,
    },

    #[error("support of {bins} bins cannot be represented with total frequency {total}")]
    SupportTooLarge { bins: usize, total: u64 },

    #[error("corrupt bitstream: {0}")]
    Corrupt(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("center-bin adjustment leaves a bin below the floor: {0}")]
    CenterBinUnderflow(String),

    #[error("mixture mass underflows on support [{min}, {max}]")]
    MassUnderflow { min: i32, max: i32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("report has zero total bits")]
    ZeroBits,

    #[error("container mismatch: {0}")]
    Mismatch(String),
}
