//! Encodes a few (speed, yaw rate) pairs with random Fourier features.

use travcost::motion::{fourier_encode, sample_frequencies, FourierConfig};

fn main() -> travcost::Result<()> {
    let bank = sample_frequencies(&FourierConfig { pairs: 4, sigma: 1.0, seed: 3 })?;
    println!("frequencies: {:?}", bank.values());
    for (v, w) in [(0.0, 0.0), (0.5, 0.0), (1.0, 0.3), (1.5, -0.6)] {
        let f = fourier_encode(v, w, &bank);
        let row: Vec<String> = f.flatten().iter().map(|x| format!("{x:+.3}")).collect();
        println!("v={v:.1} w={w:+.1}: {}", row.join(" "));
    }
    Ok(())
}
