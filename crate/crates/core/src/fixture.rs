//! Seeded synthetic corpora used by the test suites, benchmarks and CLI demos.
//!
//! The standard fixture mimics the shape of movie-recommendation dialogue
//! data: a Zipf-distributed long tail of mentions over part of the catalog,
//! a band of items never mentioned in training, a few chit-chat dialogues
//! without items, and a synthetic pool with one dialogue per catalog item.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::augment::sampling::stream_rng;
use crate::augment::SyntheticPool;
use crate::corpus::{accept_boundary_indices, Corpus, Dialogue, ItemCatalog, Speaker, Split, Turn};
use crate::metrics::{RankedRun, RunEntry};
use crate::synthgen::{build_pool, items_from_catalog, OfflineBackend, PoolOptions, PromptTemplate};

/// The bundled 4-item example: three dialogues whose training split mentions
/// items 1, 2 and 3, so initial coverage is exactly 0.75.
pub fn four_item_fixture() -> Corpus {
    let catalog = ItemCatalog::new([
        ("1", "Alpha (1999)"),
        ("2", "Bravo (2004)"),
        ("3", "Charlie (2010)"),
        ("4", "Delta (2015)"),
    ])
    .expect("static catalog");
    let d = |id: &str, split, seeker_item: &str, rec_item: &str| {
        let turns = vec![
            Turn::new(Speaker::Seeker, format!("I liked @{seeker_item}")).with_items([seeker_item]),
            Turn::new(Speaker::Recommender, format!("Try @{rec_item}"))
                .with_items([rec_item])
                .with_targets([rec_item]),
            Turn::new(Speaker::Seeker, "Thanks!"),
        ];
        let mut d = Dialogue::new(id, split, turns);
        d.episodes = Some(accept_boundary_indices(&d.turns));
        d
    };
    Corpus::new(
        catalog,
        vec![
            d("d1", Split::Train, "1", "2"),
            d("d2", Split::Train, "2", "3"),
            d("d3", Split::Test, "3", "4"),
        ],
    )
    .expect("static fixture")
}

const ADJECTIVES: [&str; 24] = [
    "Silent", "Crimson", "Broken", "Golden", "Hidden", "Last", "Midnight", "Wild", "Frozen", "Lost",
    "Electric", "Distant", "Burning", "Hollow", "Secret", "Iron", "Paper", "Velvet", "Restless", "Northern",
    "Glass", "Quiet", "Savage", "Lucky",
];
const NOUNS: [&str; 24] = [
    "River", "Empire", "Garden", "Harbor", "Signal", "Kingdom", "Station", "Horizon", "Orchard", "Frontier",
    "Mirror", "Voyage", "Summer", "Witness", "Circus", "Lantern", "Island", "Canyon", "Echo", "Parade",
    "Tide", "Dynasty", "Compass", "Storm",
];

/// Catalog of `n` items with ids `m0000..` and distinct titles with years.
pub fn synthetic_catalog(n: usize) -> ItemCatalog {
    let entries = (0..n).map(|i| {
        let adj = ADJECTIVES[i % ADJECTIVES.len()];
        let noun = NOUNS[(i / ADJECTIVES.len()) % NOUNS.len()];
        let series = i / (ADJECTIVES.len() * NOUNS.len());
        let year = 1950 + (i * 7) % 73;
        let title = if series == 0 {
            format!("The {adj} {noun} ({year})")
        } else {
            format!("The {adj} {noun} {} ({year})", series + 1)
        };
        (format!("m{i:04}"), title)
    });
    ItemCatalog::new(entries).expect("generated ids are unique")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusShape {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub items: usize,
    /// Items `0..mentionable` can appear in training; the rest never do.
    pub mentionable: usize,
    pub zipf_exponent: f64,
    /// Share of dialogues without any item mention.
    pub chit_chat: f64,
    /// Share of dialogues mentioning a single tail item only.
    pub rare_only: f64,
}

impl CorpusShape {
    pub fn standard() -> Self {
        Self {
            train: 500,
            valid: 50,
            test: 50,
            items: 300,
            mentionable: 230,
            zipf_exponent: 1.1,
            chit_chat: 0.04,
            rare_only: 0.06,
        }
    }
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, s: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|r| {
                acc += 1.0 / (r as f64).powf(s);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Self { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

const SEEKER_LINES: [&str; 5] = [
    "Hi, I'm looking for something to watch.",
    "Any good suggestions for tonight?",
    "I want a movie for the weekend.",
    "Hello! Can you help me pick a film?",
    "I'm in the mood for something new.",
];
const RECOMMENDER_LINES: [&str; 4] = [
    "Sure, what do you usually like?",
    "Happy to help. Any favourite genres?",
    "Tell me a movie you enjoyed recently.",
    "What did you watch last?",
];

fn build_dialogue(
    id: String,
    split: Split,
    items: &[usize],
    catalog_ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Dialogue {
    let mut turns = vec![
        Turn::new(Speaker::Seeker, *SEEKER_LINES.choose(rng).unwrap_or(&"Hi")),
        Turn::new(Speaker::Recommender, *RECOMMENDER_LINES.choose(rng).unwrap_or(&"Sure")),
    ];
    for (n, &i) in items.iter().enumerate() {
        let id = &catalog_ids[i];
        if n == 0 && rng.random_bool(0.5) {
            turns.push(Turn::new(Speaker::Seeker, format!("I really liked @{id}.")).with_items([id.as_str()]));
            turns.push(Turn::new(Speaker::Recommender, "Nice, let me think."));
        } else {
            turns.push(
                Turn::new(Speaker::Recommender, format!("You could try @{id}."))
                    .with_items([id.as_str()])
                    .with_targets([id.as_str()]),
            );
            turns.push(Turn::new(Speaker::Seeker, "Sounds good, thanks!"));
        }
    }
    if items.is_empty() {
        turns.push(Turn::new(Speaker::Seeker, "Never mind, I'll decide later."));
    }
    let mut d = Dialogue::new(id, split, turns);
    d.episodes = Some(accept_boundary_indices(&d.turns));
    d
}

/// A seeded corpus with the given shape; episodes are already segmented.
pub fn shaped_corpus(shape: CorpusShape, seed: u64) -> Corpus {
    let catalog = synthetic_catalog(shape.items);
    let ids: Vec<String> = catalog.ids().map(str::to_string).collect();
    let zipf = Zipf::new(shape.mentionable.min(shape.items), shape.zipf_exponent);
    let tail_start = shape.mentionable * 2 / 3;
    let mut rng = stream_rng(seed, &[0xF1]);
    let mut dialogues = Vec::with_capacity(shape.train + shape.valid + shape.test);
    let splits = [
        (Split::Train, shape.train),
        (Split::Valid, shape.valid),
        (Split::Test, shape.test),
    ];
    for (split, count) in splits {
        for n in 0..count {
            let roll: f64 = rng.random();
            let items: Vec<usize> = if roll < shape.chit_chat {
                Vec::new()
            } else if roll < shape.chit_chat + shape.rare_only {
                vec![rng.random_range(tail_start..shape.mentionable)]
            } else {
                let mut picked = Vec::new();
                for _ in 0..rng.random_range(1..=3) {
                    let i = if split == Split::Train {
                        zipf.sample(&mut rng)
                    } else {
                        // held-out splits may reach the never-trained band
                        rng.random_range(0..shape.items).min(zipf.sample(&mut rng) * 2)
                    };
                    if !picked.contains(&i) {
                        picked.push(i);
                    }
                }
                picked
            };
            dialogues.push(build_dialogue(format!("{split}-{n:05}"), split, &items, &ids, &mut rng));
        }
    }
    Corpus::new(catalog, dialogues).expect("generated ids are unique")
}

/// Offline-generated pool with one dialogue per catalog item.
pub fn covering_pool(catalog: &ItemCatalog, seed: u64) -> SyntheticPool {
    let ids: Vec<&str> = catalog.ids().collect();
    let items = items_from_catalog(catalog, &ids).expect("ids come from the catalog");
    let template = PromptTemplate::builtin("redial_en").expect("bundled template");
    build_pool(&OfflineBackend, &template, &items, seed, &PoolOptions::default(), None)
        .expect("offline generation always mentions the item")
        .pool
}

pub struct Fixture {
    pub corpus: Corpus,
    pub pool: SyntheticPool,
}

/// 500 training dialogues over a 300-item catalog plus a covering pool.
pub fn standard_fixture(seed: u64) -> Fixture {
    let corpus = shaped_corpus(CorpusShape::standard(), seed);
    let pool = covering_pool(corpus.catalog(), seed);
    Fixture { corpus, pool }
}

/// A run over every turn of the chosen split: ranked lists of `list_len`
/// items, biased toward low item ids (the popular head), with the turn's
/// target inserted at a random position about half the time.
pub fn synthetic_run(corpus: &Corpus, split: Split, list_len: usize, seed: u64, model: &str) -> RankedRun {
    let ids: Vec<&str> = corpus.catalog().ids().collect();
    let zipf = Zipf::new(ids.len(), 0.8);
    let mut rng = stream_rng(seed, &[0xA7]);
    let mut entries = Vec::new();
    for d in corpus.split(split) {
        for (t, turn) in d.turns.iter().enumerate() {
            let mut ranked: Vec<&str> = Vec::with_capacity(list_len);
            let want = list_len.min(ids.len());
            while ranked.len() < want {
                let cand = ids[zipf.sample(&mut rng)];
                if !ranked.contains(&cand) {
                    ranked.push(cand);
                }
            }
            if let Some(target) = turn.target_item_ids.first() {
                if rng.random_bool(0.5) && !ranked.contains(&target.as_str()) && !ranked.is_empty() {
                    let pos = rng.random_range(0..ranked.len());
                    ranked[pos] = target;
                }
            }
            entries.push(RunEntry::new(
                d.dialogue_id.clone(),
                t,
                d.episode_of(t).unwrap_or(0),
                ranked,
                turn.target_item_ids.iter().cloned(),
            ));
        }
    }
    RankedRun::new(model, entries)
}
