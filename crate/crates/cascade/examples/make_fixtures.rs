//! Regenerates the files in `tests/fixtures/`.
//!
//! ```text
//! cargo run -p cascade --example make_fixtures
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use cascade::checkpoint;
use cascade::config::RunConfig;
use cascade::formats::{save_comments, save_essays};
use cascade_core::corpus::{CommentRecord, Label};
use cascade_core::personality::EssayRecord;
use cascade_core::pipeline::{build_context, train_cascade};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ADJECTIVES: [&str; 10] = ["quiet", "salty", "lazy", "brave", "odd", "grumpy", "happy", "tiny", "bold", "sleepy"];
const NOUNS: [&str; 6] = ["fox", "otter", "badger", "toaster", "llama", "wizard"];

const DRY: [&str; 10] = ["honestly", "literally", "wow", "lol", "omg", "amazing", "genius", "totally", "clearly", "obviously"];
const PLAIN: [&str; 10] = ["however", "perhaps", "i think", "in my experience", "typically", "arguably", "the data", "source", "actually", "context"];
const CUES: [&str; 5] = ["yeah right", "oh sure", "what could go wrong", "great idea", "because that always works"];
const FILLER: [&str; 16] = [
    "the", "this", "is", "a", "and", "they", "it", "was", "just", "about", "people", "really", "thing", "again", "with",
    "new",
];

const MAIN: [(&str, [&str; 6]); 5] = [
    ("AskReddit", ["question", "story", "life", "work", "friends", "advice"]),
    ("gaming", ["patch", "dlc", "console", "fps", "servers", "launch"]),
    ("movies", ["sequel", "trailer", "director", "cast", "reboot", "plot"]),
    ("technology", ["update", "battery", "privacy", "startup", "app", "cloud"]),
    ("sports", ["referee", "season", "trade", "coach", "playoffs", "draft"]),
];

const POL: [(&str, [&str; 6]); 5] = [
    ("politics", ["senate", "bill", "vote", "campaign", "poll", "debate"]),
    ("worldnews", ["summit", "treaty", "minister", "sanctions", "border", "election"]),
    ("news", ["report", "police", "court", "city", "governor", "investigation"]),
    ("Conservative", ["taxes", "regulation", "spending", "liberty", "deficit", "market"]),
    ("Libertarian", ["freedom", "government", "mandate", "rights", "state", "budget"]),
];

struct Users {
    names: Vec<String>,
    dry: Vec<bool>,
}

fn users(n: usize, rng: &mut ChaCha8Rng) -> Users {
    let names = (0..n)
        .map(|i| format!("{}_{}{}", ADJECTIVES[i % 10], NOUNS[(i / 10) % 6], i))
        .collect();
    let dry = (0..n).map(|_| rng.random_bool(0.5)).collect();
    Users { names, dry }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Comments whose label leans on the author's habits, the forum and a cue.
fn comments(
    prefix: &str,
    n: usize,
    users: &Users,
    forums: &[(&str, [&str; 6])],
    leaning: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<CommentRecord> {
    (0..n)
        .map(|i| {
            let u = rng.random_range(0..users.names.len());
            let f = rng.random_range(0..forums.len());
            let cue = rng.random_bool(0.4);
            let style: &[&str] = if users.dry[u] { &DRY } else { &PLAIN };
            let mut words: Vec<String> = Vec::new();
            for _ in 0..2 {
                let pool: &[&str] = if rng.random_bool(0.75) { style } else if users.dry[u] { &PLAIN } else { &DRY };
                words.push(pool.choose(rng).unwrap().to_string());
            }
            for _ in 0..rng.random_range(3..7) {
                words.push(FILLER.choose(rng).unwrap().to_string());
            }
            words.push(forums[f].1.choose(rng).unwrap().to_string());
            words.push(forums[f].1.choose(rng).unwrap().to_string());
            if cue {
                words.push(CUES.choose(rng).unwrap().to_string());
            }
            let cut = rng.random_range(1..words.len());
            words.rotate_left(cut);
            let mut text = words.join(" ");
            text.push_str([".", "!", "?", "..."].choose(rng).unwrap());
            let user_term = if users.dry[u] { 1.5 } else { -1.5 };
            let logit = user_term + leaning[f] + if cue { 1.5 } else { -1.0 };
            CommentRecord {
                id: format!("{prefix}{i:04}"),
                user_id: users.names[u].clone(),
                forum_id: forums[f].0.to_string(),
                text,
                label: Some(if rng.random_bool(sigmoid(logit)) { Label::Sarcastic } else { Label::NonSarcastic }),
            }
        })
        .collect()
}

fn essays(n: usize, rng: &mut ChaCha8Rng) -> Vec<EssayRecord> {
    (0..n)
        .map(|_| {
            let traits: [bool; 5] = std::array::from_fn(|_| rng.random_bool(0.5));
            let pool: &[&str] = if traits[2] { &DRY } else { &PLAIN };
            let mut words: Vec<&str> = (0..12).map(|_| *FILLER.choose(rng).unwrap()).collect();
            for _ in 0..6 {
                words.insert(rng.random_range(0..words.len()), pool.choose(rng).unwrap());
            }
            if traits[4] {
                words.push("worried");
            }
            if traits[0] {
                words.insert(0, "curious");
            }
            EssayRecord {
                text: words.join(" "),
                traits,
            }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let people = users(30, &mut rng);

    let leaning = [0.0, 0.8, -0.8, 0.4, -0.4];
    let all = comments("t3_", 200, &people, &MAIN, &leaning, &mut rng);
    let (train, test) = all.split_at(160);
    save_comments(&dir.join("sarc_train.jsonl"), train)?;
    save_comments(&dir.join("sarc_test.jsonl"), test)?;
    let eval = comments("t3_eval", 12, &people, &MAIN, &leaning, &mut rng);
    save_comments(&dir.join("eval12.jsonl"), &eval)?;
    let mut pol = comments("t3_pol", 60, &people, &POL, &[1.0, 0.0, -0.5, 0.5, -1.0], &mut rng);
    for c in pol.iter_mut().skip(50) {
        c.label = None;
    }
    save_comments(&dir.join("pol_subset.jsonl"), &pol)?;
    let essays = essays(80, &mut rng);
    save_essays(&dir.join("essays.jsonl"), &essays)?;

    let config = RunConfig::load(&dir.join("small.toml"))?;
    let bank = build_context(train, &essays, &config.context_config(), config.seed)?;
    let (model, _) = train_cascade(bank, train, config.ablation(), &config.classifier_config(), config.seed)?;
    checkpoint::save(&dir.join("eval12_model.cscd"), &model.to_tensors())?;

    let report = model.evaluate(&eval)?;
    let mut by_forum: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &pol {
        *by_forum.entry(&c.forum_id).or_default() += 1;
    }
    println!("eval12 accuracy {:.3}; pol forums {by_forum:?}", report.accuracy);
    Ok(())
}
