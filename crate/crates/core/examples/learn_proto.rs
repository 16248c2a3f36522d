// scratch: timing probe for the learning-sanity criterion
use triplei_core::nn::model::ResNetConfig;
use triplei_core::nn::train::{train, TrainParams};
use triplei_core::pipeline::separable_image_dataset;

fn main() {
    let t0 = std::time::Instant::now();
    let data = separable_image_dataset(400, 32, 99);
    println!("dataset built in {:?}", t0.elapsed());
    for seed in 0..5u64 {
        let t1 = std::time::Instant::now();
        let params = TrainParams {
            lr: 1e-3,
            batch_size: 128,
            patience: 3,
            max_epochs: 30,
            seed,
            ..Default::default()
        };
        let (_, history) = train(ResNetConfig::micro(), &data, &params).unwrap();
        println!(
            "seed {seed}: best epoch {} val_acc {:.4} epochs_run {} in {:?}",
            history.best_epoch, history.best_val_acc, history.epochs_run, t1.elapsed()
        );
    }
    println!("total {:?}", t0.elapsed());
}
