// Writes corpus seed files for the fuzz targets from real encodings.
use triplei_core::io::TensorHeader;
use triplei_core::nn::checkpoint::{encode, TrainMeta};
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig, ResNetModel};
use triplei_core::triple_i::{TripleIWeights, WeightEntry, WeightPanel, WeightSource};

fn main() {
    let dir = std::path::Path::new("fuzz/corpus");

    let csv = "date,ticker,open,high,low,close,volume,mktcap\n\
               2023-01-03,AAA,10,11,9,10.5,100,5000\n\
               2023-01-03,BBB,3.5,4,3,3.75,50,\n\
               2023-01-04,AAA,10.5,12,10,11,120,5200\n";
    std::fs::write(dir.join("panel_csv/valid_panel"), csv).unwrap();

    for (name, text) in triplei_core::signals::default_alphas().into_iter().take(4) {
        std::fs::write(dir.join(format!("alpha_expr/{name}")), text).unwrap();
    }

    let header = TensorHeader::f32_row_major(vec![2, 3]);
    let mut blob = Vec::new();
    triplei_core::io::write_tensor(&mut blob, &header, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    std::fs::write(dir.join("tensor_blob/small_tensor"), blob).unwrap();

    let model = ResNetModel::<f32>::init(
        ResNetConfig::new(Depth::Micro(MicroSpec {
            input_side: 16,
            base_width: 3,
            stage_blocks: vec![1],
        })),
        7,
    )
    .unwrap();
    let (json, bin) = encode(&model, None, &TrainMeta::default(), Some("seedhash")).unwrap();
    let mut packed = Vec::new();
    packed.extend_from_slice(&(json.len() as u16).to_le_bytes());
    packed.extend_from_slice(&json);
    packed.extend_from_slice(&bin[..bin.len().min(u16::MAX as usize)]);
    // keep the seed small: manifest plus a truncated blob still exercises
    // the table validation
    std::fs::write(dir.join("checkpoint/micro_ckpt_truncated"), &packed[..packed.len().min(20000)])
        .unwrap();

    let mut wp = WeightPanel::empty(3, 2, 4);
    let w = TripleIWeights { w: vec![0.5, 0.3, 0.2], source: WeightSource::Direct };
    wp.set(0, 2, WeightEntry { by_class: [w.clone(), w.clone()], y_hat: 1 });
    wp.set(1, 3, WeightEntry { by_class: [w.clone(), w], y_hat: 0 });
    let mut buf = Vec::new();
    wp.write_blob(&mut buf).unwrap();
    std::fs::write(dir.join("weight_blob/small_panel"), buf).unwrap();

    println!("seeds written");
}
