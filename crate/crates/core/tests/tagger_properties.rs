use charrecon::io::final_character_corpus;
use charrecon::numerics::Dropout;
use charrecon::rng::derive;
use charrecon::tagger::{count_lookup_params, train_tagger, InputMode, TaggerConfig, TaggedCorpus};

fn config(epochs: usize, lr: f64) -> TaggerConfig {
    TaggerConfig {
        epochs,
        learning_rate: lr,
        dim: 8,
        word_dim: 8,
        ..Default::default()
    }
}

#[test]
fn training_likelihood_rises_for_some_grid_rate() {
    let corpus = final_character_corpus(11, 80);
    let rising = [1e-4, 2e-4, 3e-4, 4e-4, 5e-4].iter().any(|&lr| {
        let (_, trace) = train_tagger(&config(3, lr), &corpus, InputMode::Char, None, None).unwrap();
        let mut prev = trace.initial;
        trace.epochs.iter().all(|&ll| {
            let ok = ll >= prev;
            prev = ll;
            ok
        })
    });
    assert!(rising);
}

#[test]
fn char_lookup_count_ignores_word_types() {
    let small = final_character_corpus(1, 10);
    let large = final_character_corpus(2, 200);
    let count = |c: &TaggedCorpus, mode| {
        let (model, _) = train_tagger(&config(0, 1e-3), c, mode, None, None).unwrap();
        count_lookup_params(&model)
    };
    assert_eq!(count(&small, InputMode::Char), count(&large, InputMode::Char));
    assert!(count(&small, InputMode::Full) < count(&large, InputMode::Full));
}

#[test]
fn distributions_are_probabilities_after_training() {
    let corpus = final_character_corpus(5, 30);
    for mode in [InputMode::Char, InputMode::Full] {
        let cfg = TaggerConfig { dropout: 0.3, ..config(2, 5e-3) };
        let (model, _) = train_tagger(&cfg, &corpus, mode, None, None).unwrap();
        let sentence: Vec<String> = ["never", "seen", "zqa"].iter().map(|s| s.to_string()).collect();
        let mut active = Dropout::training(0.5, derive(9, 0, 0)).unwrap();
        for dropout in [&mut Dropout::inference(), &mut active] {
            for row in model.forward(&sentence, dropout).unwrap() {
                assert!(row.iter().all(|&p| p >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
