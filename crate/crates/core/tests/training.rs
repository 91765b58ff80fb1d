use evosnn_core::data::synthetic_blobs;
use evosnn_core::genome::{Genome, GenomeConfig, MOTIFS_PER_MODULE};
use evosnn_core::graph::{decode, DecodeConfig};
use evosnn_core::motif::MotifKind;
use evosnn_core::snn::{train, Network, NeuronParams, TrainConfig};

/// One module of five feed-forward-inhibition motifs with 3x3 convolutions.
fn small_genome() -> Genome {
    let cfg = GenomeConfig::new(1, 3, 2).unwrap();
    let mut genes = vec![0u8; cfg.genome_len()];
    for s in 0..MOTIFS_PER_MODULE {
        let at = cfg.motif_offset(0, s);
        genes[at] = MotifKind::FI.gene();
        genes[at + 1] = 1;
        genes[at + 2] = 1;
    }
    Genome::new(cfg, genes).unwrap()
}

fn small_net(seed: u64) -> Network {
    let graph = decode(&small_genome(), &DecodeConfig::default()).unwrap();
    Network::new(graph, 2, NeuronParams::default(), seed).unwrap()
}

#[test]
fn small_genome_learns_the_blobs() {
    let data = synthetic_blobs(700, 7);
    let mut net = small_net(0);
    let rep = train(&mut net, &data, &TrainConfig::default()).unwrap();
    assert_eq!(rep.epochs.len(), 10);
    assert!(rep.final_val.accuracy >= 0.9, "accuracy {}", rep.final_val.accuracy);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = synthetic_blobs(200, 3);
    let mut net = small_net(1);
    let before = net.params().to_vec();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..Default::default()
    };
    let rep = train(&mut net, &data, &cfg).unwrap();
    assert_eq!(net.params(), &before[..]);
    let l0 = rep.epochs[0].val.loss;
    assert!(rep.epochs.iter().all(|e| e.val.loss == l0));
}

#[test]
fn identical_seeds_identical_trajectories() {
    let data = synthetic_blobs(200, 3);
    let cfg = TrainConfig {
        epochs: 3,
        seed: 5,
        ..Default::default()
    };
    let run = || {
        let mut net = small_net(2);
        let rep = train(&mut net, &data, &cfg).unwrap();
        let losses: Vec<u64> = rep.epochs.iter().map(|e| e.train_loss.to_bits()).collect();
        (losses, net.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn class_count_mismatch_is_rejected() {
    let data = synthetic_blobs(40, 3);
    let graph = decode(&small_genome(), &DecodeConfig::default()).unwrap();
    let mut net = Network::new(graph, 3, NeuronParams::default(), 0).unwrap();
    assert_eq!(train(&mut net, &data, &TrainConfig::default()).unwrap_err().kind(), "config");
}
