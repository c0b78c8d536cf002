use cascade_core::corpus::Vocabulary;
use cascade_core::numerics::AdamConfig;
use cascade_core::personality::{pretrain, TRAITS};
use cascade_core::synthetic::{separable_essays, TRAIT_CUES};
use cascade_core::textcnn::{encode_padded, CnnConfig, Loss, TrainConfig};

#[test]
fn separable_essays_give_accurate_traits() {
    let essays = separable_essays(240, 12, 5);
    let (train, test) = essays.split_at(200);
    let vocab = Vocabulary::build(train.iter().map(|e| e.text.as_str()), 1).unwrap();
    let config = CnnConfig {
        embedding_dim: 16,
        heights: [1, 2, 3],
        feature_maps: 8,
        hidden: 16,
        max_len: 24,
        ..CnnConfig::personality(vocab.len())
    };
    let training = TrainConfig {
        batch_size: 16,
        max_epochs: 40,
        patience: 6,
        adam: AdamConfig::with_learning_rate(0.005),
        ..TrainConfig::new(Loss::BinaryCrossEntropy)
    };
    let (model, _) = pretrain(train, &vocab, config, &training, 1).unwrap();
    for (t, name) in TRAITS.iter().enumerate() {
        let correct = test
            .iter()
            .filter(|e| {
                let out = model.forward(&encode_padded(&vocab, &e.text, 24), &[]).unwrap().output;
                (out[t] > 0.5) == e.traits[t]
            })
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc >= 0.9, "trait {name} (cue `{}`): {acc}", TRAIT_CUES[t]);
    }
}
