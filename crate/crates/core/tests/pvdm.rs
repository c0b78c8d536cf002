use cascade_core::numerics::cosine;
use cascade_core::pvdm::{train, InferStatus, PvdmConfig};
use cascade_core::synthetic::topic_corpus;

fn separation(table: &cascade_core::embedding::EmbeddingTable, topics: &[usize]) -> (f64, f64) {
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..table.len() {
        for j in i + 1..table.len() {
            let c = cosine(table.row(i), table.row(j));
            let slot = if topics[i] == topics[j] { &mut intra } else { &mut inter };
            slot.0 += c;
            slot.1 += 1;
        }
    }
    (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64)
}

#[test]
fn documents_cluster_by_topic() {
    let corpus = topic_corpus(2, 100, 50, 200, 11).unwrap();
    let config = PvdmConfig {
        dim: 32,
        epochs: 20,
        seed: 3,
        ..PvdmConfig::default()
    };
    let (model, _) = train::<f32>(&corpus.docs, corpus.vocab.len(), config).unwrap();
    let (intra, inter) = separation(&model.doc_table(), &corpus.topics);
    println!("intra {intra:.3} inter {inter:.3}");
    assert!(intra - inter >= 0.2, "intra {intra} inter {inter}");
}

#[test]
fn loss_falls_over_training() {
    let corpus = topic_corpus(3, 10, 20, 60, 1).unwrap();
    let config = PvdmConfig {
        dim: 16,
        epochs: 15,
        ..PvdmConfig::default()
    };
    let (_, history) = train::<f32>(&corpus.docs, corpus.vocab.len(), config).unwrap();
    assert_eq!(history.len(), 15);
    // uniform over 63 words is ln 63 ≈ 4.14; knowing the topic leaves ln 20 ≈ 3.0
    assert!(history.last().unwrap() < &(history[0] - 0.3), "{history:?}");
}

#[test]
fn same_seed_same_model() {
    let corpus = topic_corpus(2, 5, 10, 30, 2).unwrap();
    let config = PvdmConfig {
        dim: 8,
        epochs: 3,
        seed: 9,
        ..PvdmConfig::default()
    };
    let a = train::<f32>(&corpus.docs, corpus.vocab.len(), config).unwrap();
    let b = train::<f32>(&corpus.docs, corpus.vocab.len(), config).unwrap();
    assert_eq!(a, b);
    let c = train::<f32>(&corpus.docs, corpus.vocab.len(), PvdmConfig { seed: 10, ..config }).unwrap();
    assert_ne!(a.0.doc_vectors, c.0.doc_vectors);
}

#[test]
fn inferred_vectors_land_near_their_topic() {
    let corpus = topic_corpus(2, 30, 30, 100, 4).unwrap();
    let config = PvdmConfig {
        dim: 16,
        epochs: 15,
        ..PvdmConfig::default()
    };
    let (model, _) = train::<f32>(&corpus.docs, corpus.vocab.len(), config).unwrap();
    let table = model.doc_table();
    let fresh = topic_corpus(2, 3, 30, 100, 99).unwrap();
    let mut correct = 0;
    for (doc, &topic) in fresh.docs.iter().zip(&fresh.topics) {
        let tokens: Vec<_> = doc
            .tokens
            .iter()
            .map(|&t| corpus.vocab.index_of(fresh.vocab.token(t)).unwrap())
            .collect();
        let inf = model.infer_doc_vector(&tokens, 20, 5);
        assert_eq!(inf.status, InferStatus::Ok);
        let mean_sim = |t: usize| {
            let sims: Vec<f64> = (0..table.len())
                .filter(|&i| corpus.topics[i] == t)
                .map(|i| cosine(&inf.vector, table.row(i)))
                .collect();
            sims.iter().sum::<f64>() / sims.len() as f64
        };
        if mean_sim(topic) > mean_sim(1 - topic) {
            correct += 1;
        }
    }
    assert_eq!(correct, fresh.docs.len());
}

#[test]
fn unknown_tokens_infer_zero() {
    let corpus = topic_corpus(2, 3, 5, 20, 0).unwrap();
    let (model, _) = train::<f32>(&corpus.docs, corpus.vocab.len(), PvdmConfig { dim: 4, epochs: 1, ..PvdmConfig::default() }).unwrap();
    let inf = model.infer_doc_vector(&[1, 1, 1], 5, 0);
    assert_eq!(inf.status, InferStatus::NoKnownTokens);
    assert!(inf.vector.iter().all(|&v| v == 0.0));
}
