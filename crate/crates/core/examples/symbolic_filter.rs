//! Classify generated drawings and photos as symbolic or natural.
//!
//! cargo run --release --example symbolic_filter -- [count]

use puresearch::synthetic::{flat_drawing, noise_photo};
use puresearch::visual::{classify_symbolic, SymbolicThresholds, VisualFeatures};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let t = SymbolicThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut drawings_ok, mut photos_ok) = (0, 0);
    for _ in 0..n {
        let d = VisualFeatures::compute(&flat_drawing(&mut rng, 150, 150))?;
        if classify_symbolic(&d, &t).is_symbolic() {
            drawings_ok += 1;
        }
        let p = VisualFeatures::compute(&noise_photo(&mut rng, 150, 150))?;
        let verdict = classify_symbolic(&p, &t);
        if !verdict.is_symbolic() {
            photos_ok += 1;
        }
    }
    println!("drawings flagged symbolic: {drawings_ok}/{n}");
    println!("photos kept as natural:    {photos_ok}/{n}");
    Ok(())
}
