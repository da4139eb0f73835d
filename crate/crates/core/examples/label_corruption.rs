//! Corrupts a fraction of labels and shows what the plan records.

use layerlens::data::{corrupt_labels, synth_blobs};

fn main() -> layerlens::Result<()> {
    let clean = synth_blobs(1000, 8, 5, 2.0, 1)?;
    for ratio in [0.0, 0.1, 0.25, 0.5, 1.0] {
        let (noisy, plan) = corrupt_labels(&clean, ratio, 42)?;
        let changed = noisy
            .labels()
            .iter()
            .zip(clean.labels())
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "ratio {ratio:<4} corrupted {:>4}  changed {changed:>4}  effective noise {:.3}  counts {:?}",
            plan.corrupted_indices.len(),
            plan.effective_noise,
            noisy.class_counts()
        );
        assert_eq!(noisy.recovered_labels(), clean.labels());
    }
    Ok(())
}
