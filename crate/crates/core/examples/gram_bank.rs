//! Builds a small kernel bank from points, normalizes it, and round-trips
//! it through the CSKB file format.

use cskl::kernel::{combine, compute_gram, load_bank, save_bank, Dataset, KernelBank, KernelSpec};
use ndarray::array;

fn main() -> cskl::Result<()> {
    let points = array![[0.0, 0.0], [0.5, 0.2], [3.0, 3.1], [2.8, 3.4]];
    let data = Dataset::new(points, vec![-1, -1, 1, 1])?;

    let specs = [
        KernelSpec::gaussian(1.0),
        KernelSpec::polynomial(2, 1.0),
        KernelSpec::linear().on_features(vec![0]),
    ];
    let kernels = specs
        .iter()
        .map(|s| compute_gram(&data, s))
        .collect::<cskl::Result<Vec<_>>>()?;
    for (s, k) in specs.iter().zip(&kernels) {
        println!("{:?}: trace {:.4}", s.kind, k.trace());
    }

    let raw = KernelBank::new(kernels, data.labels().to_vec())?;
    // trace m for every kernel, plus a small ridge
    let (bank, scales) = raw.prepare(1e-8)?;
    println!("scale factors {scales:.4?}");
    for k in bank.kernels() {
        println!("normalized trace {:.6}", k.trace());
    }

    let mixed = combine(&bank, &[0.5, 0.25, 0.25])?;
    println!("combined kernel:\n{:.4}", mixed.values());

    let path = std::env::temp_dir().join("gram_bank_example.cskb");
    save_bank(&bank, &path)?;
    let back = load_bank(&path)?;
    // the file keeps kernel kind and parameters but not feature subsets
    let same = back.labels() == bank.labels()
        && back
            .kernels()
            .iter()
            .zip(bank.kernels())
            .all(|(a, b)| a.values() == b.values());
    println!("round trip values identical: {same}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
