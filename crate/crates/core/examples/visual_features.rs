//! Compute the visual features of a few generated images, or of files given
//! on the command line.
//!
//! cargo run --example visual_features -- [image ...]

use puresearch::synthetic::{flat_drawing, noise_photo, striped_page};
use puresearch::visual::{decode, VisualFeatures, RANKING_FEATURES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let files: Vec<String> = std::env::args().skip(1).collect();
    let mut images = Vec::new();
    if files.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        images.push(("photo".to_string(), noise_photo(&mut rng, 160, 140)));
        images.push(("drawing".to_string(), flat_drawing(&mut rng, 160, 140)));
        images.push(("page rotated 5 deg".to_string(), striped_page(240, 240, 5.0)));
    } else {
        for f in files {
            let img = decode(&std::fs::read(&f)?)?;
            images.push((f, img));
        }
    }
    for (name, img) in &images {
        let v = VisualFeatures::compute(img)?;
        println!("{name}");
        for (feature, value) in RANKING_FEATURES.iter().zip(v.ranking_vector()) {
            println!("    {feature:<22} {value:.4}");
        }
        match v.text_skew_deg {
            Some(a) => println!("    text skew              {a:+.1} deg"),
            None => println!("    text skew              none"),
        }
    }
    Ok(())
}
