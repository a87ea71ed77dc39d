//! Binary codes and the `±1/√N` walks they describe.

mod compress;
mod ladder;
mod path;

pub use compress::{
    compress, compressed_len, decompress, deficiency_proxy, slack, DeficiencyReport,
};
pub use ladder::{build_ladder, RefinementLadder, COUPLING_RULE, MAX_LADDER_LEVEL};
pub use path::{decode_code, encode_path, modulus_ratio, sample_word, walk_value, WalkPath};
