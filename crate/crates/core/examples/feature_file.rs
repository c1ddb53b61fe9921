//! Writes a feature file, dumps its bytes and reads it back.

use patchseg::io::{decode_features, encode_features, read_features, write_features, HEADER_LEN};
use patchseg::nn::DenseMatrix;
use patchseg::PatchFeatureGrid;

fn main() -> patchseg::Result<()> {
    let grid = PatchFeatureGrid::new(1, 1, DenseMatrix::from_vec(1, 2, vec![1.0, -2.5])?, 8, 8, 8)?;
    let bytes = encode_features(&grid);
    for (i, chunk) in bytes.chunks(4).enumerate() {
        let label = if i * 4 < HEADER_LEN { "header" } else { "payload" };
        println!("{:>3}  {:02X?}  {label}", i * 4, chunk);
    }

    let path = std::env::temp_dir().join("patchseg_example.unsg");
    write_features(&grid, &path)?;
    assert_eq!(read_features(&path)?, grid);

    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    println!("corrupted magic: {}", decode_features(&corrupt).unwrap_err());
    println!("truncated: {}", decode_features(&bytes[..36]).unwrap_err());
    Ok(())
}
