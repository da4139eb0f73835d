//! Saves a trained model with its initialization and reloads it bit for bit.

use layerlens::data::synth_blobs;
use layerlens::nn::{
    encode_checkpoint, init_model, load_checkpoint, save_checkpoint, train, ArchSpec, TrainConfig,
};

fn main() -> layerlens::Result<()> {
    let data = synth_blobs(200, 6, 3, 2.0, 1)?;
    let (mut model, snapshot) = init_model(ArchSpec::new(6, 16, 3, 3)?, 2)?;
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 20,
        batch_size: 16,
        init_seed: 2,
        shuffle_seed: 3,
    };
    train(&mut model, data.features(), data.labels(), &cfg)?;

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("model.llns");
    save_checkpoint(&model, &snapshot, &path)?;
    let (m2, s2) = load_checkpoint(&path)?;
    assert_eq!(m2, model);
    assert_eq!(s2, snapshot);
    let bytes = encode_checkpoint(&model, &snapshot)?;
    println!(
        "{} bytes, {} parameters, reload is exact",
        bytes.len(),
        model.parameter_count()
    );
    Ok(())
}
