//! Write a latent to an SVRT file, read it back and dump the header.

use svr::format::encode_tensor;
use svr::{read_tensor, write_tensor, Dims4, Tensor4};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("latent.svrt");
    let t = Tensor4::randn(Dims4::new(8, 4, 16, 16), 1).unwrap();
    write_tensor(&path, &t).unwrap();

    let back = read_tensor(&path).unwrap();
    assert!(back.bit_eq(&t));

    let bytes = encode_tensor(&t);
    println!("file        {}", path.display());
    println!("bytes       {}", bytes.len());
    println!("magic       {:?}", std::str::from_utf8(&bytes[..4]).unwrap());
    println!("version     {}", u16::from_le_bytes([bytes[4], bytes[5]]));
    println!("dtype/rank  {} / {}", bytes[6], bytes[7]);
    let dims: Vec<u32> = bytes[8..24].chunks(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    println!("dims        {dims:?}");
    println!("l2 norm     {:.6}", back.l2_norm());
}
