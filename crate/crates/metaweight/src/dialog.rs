//! Restaurant-dialog corpora: line-format parser and serializer,
//! turn-level example extraction, subsampling, and a synthetic generator
//! producing a related booking task and a personalized primary task with
//! a contradictory suggestion-ordering rule.

use std::path::Path;

use crate::error::{Error, Result};
use crate::memnet::{encode_bow, tokenize, CandidateSet, DialogExample, TaskTag, Vocabulary, MISSING_ANSWER};
use crate::rng::Rng;
use crate::vision::Split;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialogTask {
    Related,
    Primary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    User,
    Bot,
    Kb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

/// One dialog: optional leading profile line, then turns in order.
/// User and bot turns always come in adjacent pairs; KB lines stand alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub profile: Option<String>,
    pub turns: Vec<Turn>,
}

impl Dialog {
    pub fn bot_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.speaker == Speaker::Bot).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogCorpus {
    pub dialogs: Vec<Dialog>,
    pub task: DialogTask,
    pub split: Split,
}

/// Line format: decimal line number, one space, then either
/// `user<TAB>bot` or a tab-less KB line. Dialogs split at blank lines or
/// a line-number reset to 1. A tab-less first line is the user profile.
pub fn parse_babi_text(text: &str) -> Result<Vec<Dialog>> {
    let mut dialogs = Vec::new();
    let mut current: Option<Dialog> = None;
    let mut prev_num = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            if let Some(d) = current.take() {
                dialogs.push(d);
            }
            prev_num = 0;
            continue;
        }
        let (num_str, rest) = raw.split_once(' ').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected `<number> <text>`".into(),
        })?;
        let num: usize = num_str.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad line number `{num_str}`"),
        })?;
        if num == 1 {
            if let Some(d) = current.take() {
                dialogs.push(d);
            }
        } else if num != prev_num + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("line number {num} after {prev_num}"),
            });
        }
        prev_num = num;
        let dialog = current.get_or_insert_with(|| Dialog {
            profile: None,
            turns: Vec::new(),
        });
        match rest.split_once('\t') {
            Some((user, bot)) => {
                if user.is_empty() || bot.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "empty utterance".into(),
                    });
                }
                dialog.turns.push(Turn {
                    speaker: Speaker::User,
                    text: user.to_string(),
                });
                dialog.turns.push(Turn {
                    speaker: Speaker::Bot,
                    text: bot.to_string(),
                });
            }
            None => {
                if num == 1 && dialog.turns.is_empty() && dialog.profile.is_none() {
                    dialog.profile = Some(rest.to_string());
                } else {
                    dialog.turns.push(Turn {
                        speaker: Speaker::Kb,
                        text: rest.to_string(),
                    });
                }
            }
        }
    }
    if let Some(d) = current.take() {
        dialogs.push(d);
    }
    Ok(dialogs)
}

pub fn parse_babi(path: &Path, task: DialogTask, split: Split) -> Result<DialogCorpus> {
    let text = std::fs::read_to_string(path)?;
    Ok(DialogCorpus {
        dialogs: parse_babi_text(&text)?,
        task,
        split,
    })
}

/// Inverse of the parser; parse(serialize(d)) == d for well-formed dialogs.
pub fn serialize_dialogs(dialogs: &[Dialog]) -> String {
    let mut out = String::new();
    for (di, d) in dialogs.iter().enumerate() {
        if di > 0 {
            out.push('\n');
        }
        let mut n = 1usize;
        if let Some(p) = &d.profile {
            out.push_str(&format!("{n} {p}\n"));
            n += 1;
        }
        let mut turns = d.turns.iter().peekable();
        while let Some(t) = turns.next() {
            match t.speaker {
                Speaker::Kb => {
                    out.push_str(&format!("{n} {}\n", t.text));
                }
                Speaker::User => {
                    let bot = turns.next().expect("user turn paired with bot turn");
                    debug_assert_eq!(bot.speaker, Speaker::Bot);
                    out.push_str(&format!("{n} {}\t{}\n", t.text, bot.text));
                }
                Speaker::Bot => panic!("unpaired bot turn"),
            }
            n += 1;
        }
    }
    out
}

/// Sentences a corpus contributes to the vocabulary: profile lines, every
/// turn with its speaker marker, and position markers.
pub fn corpus_sentences(corpus: &DialogCorpus) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut max_mem = 0usize;
    for d in &corpus.dialogs {
        if let Some(p) = &d.profile {
            out.push(tokenize(p));
        }
        for t in &d.turns {
            out.push(tokenize(&t.text));
        }
        max_mem = max_mem.max(d.profile.is_some() as usize + d.turns.len());
    }
    out.push(vec!["$user".to_string(), "$bot".to_string()]);
    out.push((1..=max_mem).map(|k| format!("#{k}")).collect());
    out
}

pub fn build_vocab(corpora: &[&DialogCorpus]) -> Vocabulary {
    let sentences: Vec<Vec<String>> = corpora.iter().flat_map(|c| corpus_sentences(c)).collect();
    let slices: Vec<&[String]> = sentences.iter().map(|s| s.as_slice()).collect();
    Vocabulary::build(slices.into_iter())
}

/// Distinct bot utterances of a training corpus, in first-seen order.
pub fn candidate_set(corpus: &DialogCorpus, vocab: &Vocabulary) -> CandidateSet {
    let utterances: Vec<String> = corpus
        .dialogs
        .iter()
        .flat_map(|d| d.turns.iter())
        .filter(|t| t.speaker == Speaker::Bot)
        .map(|t| t.text.clone())
        .collect();
    CandidateSet::build(&utterances, vocab)
}

/// One example per bot turn: memory holds the profile, KB lines, and all
/// prior turns with speaker and position markers; the query is the most
/// recent user utterance. Training answers must exist in the candidate
/// set; test and validation answers missing from it map to a sentinel
/// that is always scored wrong.
pub fn extract_examples(
    corpus: &DialogCorpus,
    vocab: &Vocabulary,
    cands: &CandidateSet,
    tag: TaskTag,
) -> Result<Vec<DialogExample>> {
    let allow_missing = corpus.split != Split::Train;
    let mut out = Vec::new();
    for d in &corpus.dialogs {
        let mut memory = Vec::new();
        if let Some(p) = &d.profile {
            memory.push(encode_bow(&tokenize(p), vocab));
        }
        let mut turns = d.turns.iter().peekable();
        while let Some(t) = turns.next() {
            match t.speaker {
                Speaker::Kb => {
                    memory.push(encode_bow(&tokenize(&t.text), vocab));
                }
                Speaker::User => {
                    let bot = turns.next().ok_or_else(|| Error::Parse {
                        line: 0,
                        message: "user turn without bot response".into(),
                    })?;
                    let answer = match cands.id_of(&bot.text) {
                        Some(id) => id,
                        None if allow_missing => MISSING_ANSWER,
                        None => {
                            return Err(Error::Config(format!(
                                "training answer `{}` missing from candidate set",
                                bot.text
                            )))
                        }
                    };
                    out.push(DialogExample {
                        memory: memory.clone(),
                        query: encode_bow(&tokenize(&t.text), vocab),
                        answer,
                        answer_enc: encode_bow(&tokenize(&bot.text), vocab),
                        task_tag: tag,
                    });
                    let pos_user = format!("#{}", memory.len() + 1);
                    let mut ut = tokenize(&t.text);
                    ut.push("$user".to_string());
                    ut.push(pos_user);
                    memory.push(encode_bow(&ut, vocab));
                    let pos_bot = format!("#{}", memory.len() + 1);
                    let mut bt = tokenize(&bot.text);
                    bt.push("$bot".to_string());
                    bt.push(pos_bot);
                    memory.push(encode_bow(&bt, vocab));
                }
                Speaker::Bot => {
                    return Err(Error::Parse {
                        line: 0,
                        message: "bot turn without preceding user turn".into(),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Keep n whole dialogs: the seeded-random default or the deterministic
/// prefix when take_first is set.
pub fn subsample(
    corpus: &DialogCorpus,
    n_dialogs: usize,
    rng: &mut Rng,
    take_first: bool,
) -> Result<DialogCorpus> {
    if n_dialogs > corpus.dialogs.len() {
        return Err(Error::Config(format!(
            "cannot subsample {n_dialogs} dialogs from {}",
            corpus.dialogs.len()
        )));
    }
    let dialogs = if take_first {
        corpus.dialogs[..n_dialogs].to_vec()
    } else {
        let mut ids = rng.sample_without_replacement(corpus.dialogs.len(), n_dialogs);
        ids.sort_unstable();
        ids.into_iter().map(|i| corpus.dialogs[i].clone()).collect()
    };
    Ok(DialogCorpus {
        dialogs,
        task: corpus.task,
        split: corpus.split,
    })
}

pub const CUISINES: [&str; 4] = ["italian", "indian", "thai", "french"];
pub const SPECIALITIES: [&str; 6] = ["pizza", "curry", "noodles", "crepes", "salad", "soup"];
pub const AGES: [&str; 3] = ["young", "middle_aged", "elderly"];
pub const GENDERS: [&str; 2] = ["male", "female"];
pub const DIETS: [&str; 2] = ["veg", "non_veg"];

#[derive(Debug, Clone)]
struct Restaurant {
    name: String,
    cuisine: usize,
    rating: usize,
    diet: usize,
    speciality: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub restaurants_per_cuisine: usize,
    pub related_train: usize,
    pub related_valid: usize,
    pub related_test: usize,
    pub primary_train: usize,
    pub primary_valid: usize,
    pub primary_test: usize,
}

impl SyntheticConfig {
    /// Desk-scale default: full related corpus, scarce primary corpus.
    pub fn fast() -> Self {
        SyntheticConfig {
            restaurants_per_cuisine: 4,
            related_train: 1000,
            related_valid: 100,
            related_test: 100,
            primary_train: 50,
            primary_valid: 30,
            primary_test: 150,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpora {
    pub related_train: DialogCorpus,
    pub related_valid: DialogCorpus,
    pub related_test: DialogCorpus,
    pub primary_train: DialogCorpus,
    pub primary_valid: DialogCorpus,
    pub primary_test: DialogCorpus,
}

/// Ratings within a cuisine are distinct so the best-rated suggestion is
/// unambiguous.
fn build_world(per_cuisine: usize, rng: &mut Rng) -> Vec<Restaurant> {
    assert!(per_cuisine <= 8, "ratings drawn without ties from 1..=8");
    let mut world = Vec::new();
    for (ci, _) in CUISINES.iter().enumerate() {
        let mut ratings: Vec<usize> = (1..=8).collect();
        rng.shuffle(&mut ratings);
        for i in 0..per_cuisine {
            world.push(Restaurant {
                name: format!("resto_{}_{}", CUISINES[ci], i + 1),
                cuisine: ci,
                rating: ratings[i],
                diet: rng.index(DIETS.len()),
                speciality: rng.index(SPECIALITIES.len()),
            });
        }
    }
    world
}

fn kb_lines(r: &Restaurant, lines: &mut Vec<String>) {
    lines.push(format!("{} cuisine {}", r.name, CUISINES[r.cuisine]));
    lines.push(format!("{} rating {}", r.name, r.rating));
    lines.push(format!("{} diet {}", r.name, DIETS[r.diet]));
    lines.push(format!("{} speciality {}", r.name, SPECIALITIES[r.speciality]));
}

fn sample_shown<'w>(world: &'w [Restaurant], cuisine: usize, rng: &mut Rng) -> Vec<&'w Restaurant> {
    let pool: Vec<&Restaurant> = world.iter().filter(|r| r.cuisine == cuisine).collect();
    let ids = rng.sample_without_replacement(pool.len(), 3.min(pool.len()));
    ids.into_iter().map(|i| pool[i]).collect()
}

/// Attribute-lookup question about one shown restaurant. The same rule
/// holds in both tasks, so these turns are consistent across tasks, but
/// the (name, attribute) input space is combinatorial: a small primary
/// corpus cannot cover it, while the related corpus teaches the lookup.
fn attribute_question(r: &Restaurant, rng: &mut Rng) -> (String, bool) {
    if rng.uniform() < 0.5 {
        let diet = rng.index(DIETS.len());
        (
            format!("does {} serve {} food", r.name, DIETS[diet]),
            r.diet == diet,
        )
    } else {
        let spec = rng.index(SPECIALITIES.len());
        (
            format!("does {} serve {}", r.name, SPECIALITIES[spec]),
            r.speciality == spec,
        )
    }
}

/// Related task: book by cuisine, answer attribute questions, suggest the
/// highest-rated option; also contains request-update and address subtasks
/// the primary task lacks.
fn emit_related(world: &[Restaurant], n_dialogs: usize, rng: &mut Rng) -> String {
    let mut blocks = Vec::with_capacity(n_dialogs);
    for _ in 0..n_dialogs {
        let mut lines = Vec::new();
        lines.push("hello\thello what can i help you with".to_string());
        let mut cuisine = rng.index(CUISINES.len());
        lines.push(format!(
            "may i book a table serving {} food\tok let me look into some options",
            CUISINES[cuisine]
        ));
        if rng.uniform() < 0.3 {
            cuisine = (cuisine + 1 + rng.index(CUISINES.len() - 1)) % CUISINES.len();
            lines.push(format!(
                "actually make that {} food\tsure is there anything else to update",
                CUISINES[cuisine]
            ));
        }
        let shown = sample_shown(world, cuisine, rng);
        let mut kb = Vec::new();
        for r in &shown {
            kb_lines(r, &mut kb);
        }
        lines.extend(kb);
        for _ in 0..2 {
            let r = shown[rng.index(shown.len())];
            let (q, yes) = attribute_question(r, rng);
            let a = if yes { "yes it does" } else { "no it does not" };
            lines.push(format!("{q}\t{a}"));
        }
        let mut ranked: Vec<&&Restaurant> = shown.iter().collect();
        ranked.sort_by_key(|r| std::cmp::Reverse(r.rating));
        lines.push(format!("which do you recommend\ti suggest {}", ranked[0].name));
        lines.push(format!(
            "any other option\ti suggest {}",
            ranked[1].name
        ));
        if rng.uniform() < 0.5 {
            lines.push(format!(
                "what is the address\t{}_address is the address",
                ranked[0].name
            ));
        }
        lines.push("thanks\tyou are welcome".to_string());
        blocks.push(number_block(None, &lines));
    }
    blocks.join("\n")
}

fn greeting(age: usize) -> &'static str {
    ["hey there what can i do for you", "hello what can i help you with", "good day how may i assist you"][age]
}

fn ack(age: usize) -> &'static str {
    ["cool let me check some options", "ok let me look into some options", "certainly allow me to review the options"][age]
}

fn suggest(age: usize, name: &str) -> String {
    match age {
        0 => format!("you should try {name}"),
        1 => format!("i suggest {name}"),
        _ => format!("may i recommend {name}"),
    }
}

fn bye(age: usize) -> &'static str {
    ["no worries", "you are welcome", "my pleasure good day"][age]
}

fn answer_yes(age: usize) -> &'static str {
    ["yep it does", "yes it does", "indeed it does"][age]
}

fn answer_no(age: usize) -> &'static str {
    ["nope it does not", "no it does not", "i am afraid it does not"][age]
}

/// Primary task: personalized variant. Responses are styled by the
/// profile's age group, and the suggestion ranks the shown restaurants by
/// (diet match, favorite-food match, rating), which disagrees with the
/// related task's rating-only rule on a fraction of dialogs.
fn emit_primary(world: &[Restaurant], n_dialogs: usize, rng: &mut Rng) -> String {
    let mut blocks = Vec::with_capacity(n_dialogs);
    for _ in 0..n_dialogs {
        let age = rng.index(AGES.len());
        let gender = rng.index(GENDERS.len());
        let diet = rng.index(DIETS.len());
        let fav = rng.index(SPECIALITIES.len());
        let profile = format!(
            "{} {} {} {}",
            AGES[age], GENDERS[gender], DIETS[diet], SPECIALITIES[fav]
        );
        let cuisine = rng.index(CUISINES.len());
        let shown = sample_shown(world, cuisine, rng);
        let mut ranked: Vec<&&Restaurant> = shown.iter().collect();
        ranked.sort_by_key(|r| {
            std::cmp::Reverse(((r.diet == diet) as usize, (r.speciality == fav) as usize, r.rating))
        });
        let mut lines = Vec::new();
        lines.push(format!("hello\t{}", greeting(age)));
        lines.push(format!(
            "may i book a table serving {} food\t{}",
            CUISINES[cuisine],
            ack(age)
        ));
        for r in &shown {
            kb_lines(r, &mut lines);
        }
        for _ in 0..2 {
            let r = shown[rng.index(shown.len())];
            let (q, yes) = attribute_question(r, rng);
            let a = if yes { answer_yes(age) } else { answer_no(age) };
            lines.push(format!("{q}\t{a}"));
        }
        lines.push(format!(
            "which do you recommend\t{}",
            suggest(age, &ranked[0].name)
        ));
        lines.push(format!(
            "any other option\t{}",
            suggest(age, &ranked[1].name)
        ));
        lines.push(format!("thanks\t{}", bye(age)));
        blocks.push(number_block(Some(&profile), &lines));
    }
    blocks.join("\n")
}

fn number_block(profile: Option<&str>, lines: &[String]) -> String {
    let mut out = String::new();
    let mut n = 1usize;
    if let Some(p) = profile {
        out.push_str(&format!("{n} {p}\n"));
        n += 1;
    }
    for l in lines {
        out.push_str(&format!("{n} {l}\n"));
        n += 1;
    }
    out
}

/// Generate both tasks in the external text format and re-parse them, so
/// the output is well-formed by construction.
pub fn generate_synthetic(cfg: &SyntheticConfig, rng: &mut Rng) -> Result<SyntheticCorpora> {
    let world = build_world(cfg.restaurants_per_cuisine, rng);
    let corpus = |task, split, n: usize, rng: &mut Rng| -> Result<DialogCorpus> {
        let text = match task {
            DialogTask::Related => emit_related(&world, n, rng),
            DialogTask::Primary => emit_primary(&world, n, rng),
        };
        Ok(DialogCorpus {
            dialogs: parse_babi_text(&text)?,
            task,
            split,
        })
    };
    Ok(SyntheticCorpora {
        related_train: corpus(DialogTask::Related, Split::Train, cfg.related_train, rng)?,
        related_valid: corpus(DialogTask::Related, Split::Valid, cfg.related_valid, rng)?,
        related_test: corpus(DialogTask::Related, Split::Test, cfg.related_test, rng)?,
        primary_train: corpus(DialogTask::Primary, Split::Train, cfg.primary_train, rng)?,
        primary_valid: corpus(DialogTask::Primary, Split::Valid, cfg.primary_valid, rng)?,
        primary_test: corpus(DialogTask::Primary, Split::Test, cfg.primary_test, rng)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn single_line_dialog() {
        let d = parse_babi_text("1 hi\tgreetings\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(
            d[0].turns,
            vec![
                Turn { speaker: Speaker::User, text: "hi".into() },
                Turn { speaker: Speaker::Bot, text: "greetings".into() },
            ]
        );
        assert!(d[0].profile.is_none());
    }

    #[test]
    fn line_number_reset_starts_new_dialog() {
        let d = parse_babi_text("1 a\tb\n2 c\td\n1 e\tf\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].turns.len(), 4);
        assert_eq!(d[1].turns.len(), 2);
    }

    #[test]
    fn blank_line_separates_dialogs() {
        let d = parse_babi_text("1 a\tb\n\n1 c\td\n").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn tabless_first_line_is_profile_later_lines_are_kb() {
        let d = parse_babi_text("1 young male veg pizza\n2 hi\thello\n3 resto_a rating 5\n4 ok\tbye\n")
            .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].profile.as_deref(), Some("young male veg pizza"));
        assert_eq!(d[0].turns[2].speaker, Speaker::Kb);
        assert_eq!(d[0].turns[2].text, "resto_a rating 5");
    }

    #[test]
    fn non_monotone_line_number_is_error_with_line() {
        let err = parse_babi_text("1 a\tb\n3 c\td\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_error() {
        assert!(parse_babi_text("nonumber\n").is_err());
        assert!(parse_babi_text("x a\tb\n").is_err());
    }

    #[test]
    fn serialize_parse_round_trip_is_fixed_point() {
        let text = "1 young male veg pizza\n2 hi\thello\n3 resto_a rating 5\n4 ok\tbye\n\n1 hey\tyo\n";
        let parsed = parse_babi_text(text).unwrap();
        let emitted = serialize_dialogs(&parsed);
        assert_eq!(parse_babi_text(&emitted).unwrap(), parsed);
        assert_eq!(serialize_dialogs(&parse_babi_text(&emitted).unwrap()), emitted);
    }

    fn tiny_corpus(split: Split) -> DialogCorpus {
        let text = "1 young male veg pizza\n2 hi\thello\n3 resto_a rating 5\n4 ok\tbye now\n";
        DialogCorpus {
            dialogs: parse_babi_text(text).unwrap(),
            task: DialogTask::Primary,
            split,
        }
    }

    #[test]
    fn one_example_per_bot_turn_memory_grows() {
        let c = tiny_corpus(Split::Train);
        let vocab = build_vocab(&[&c]);
        let cands = candidate_set(&c, &vocab);
        let exs = extract_examples(&c, &vocab, &cands, TaskTag::Primary).unwrap();
        assert_eq!(exs.len(), c.dialogs[0].bot_turns());
        // first example: profile only in memory; second adds kb + turn pair.
        assert_eq!(exs[0].memory.len(), 1);
        assert_eq!(exs[1].memory.len(), 4);
        assert_eq!(exs[0].answer, cands.id_of("hello").unwrap());
        assert_eq!(exs[1].answer, cands.id_of("bye now").unwrap());
    }

    #[test]
    fn one_turn_dialog_has_empty_memory() {
        let c = DialogCorpus {
            dialogs: parse_babi_text("1 hi\tgreetings\n").unwrap(),
            task: DialogTask::Related,
            split: Split::Train,
        };
        let vocab = build_vocab(&[&c]);
        let cands = candidate_set(&c, &vocab);
        let exs = extract_examples(&c, &vocab, &cands, TaskTag::Related).unwrap();
        assert_eq!(exs.len(), 1);
        assert!(exs[0].memory.is_empty());
    }

    #[test]
    fn missing_answer_train_errors_test_gets_sentinel() {
        let train = tiny_corpus(Split::Train);
        let vocab = build_vocab(&[&train]);
        let cands = CandidateSet::build(&["hello".to_string()], &vocab);
        assert!(extract_examples(&train, &vocab, &cands, TaskTag::Primary).is_err());
        let test = tiny_corpus(Split::Test);
        let exs = extract_examples(&test, &vocab, &cands, TaskTag::Primary).unwrap();
        assert_eq!(exs[0].answer, 0);
        assert_eq!(exs[1].answer, MISSING_ANSWER);
    }

    #[test]
    fn candidate_set_deduplicates() {
        let c = DialogCorpus {
            dialogs: parse_babi_text("1 a\tsame\n2 b\tsame\n3 c\tother\n").unwrap(),
            task: DialogTask::Related,
            split: Split::Train,
        };
        let vocab = build_vocab(&[&c]);
        let cands = candidate_set(&c, &vocab);
        assert_eq!(cands.len(), 2);
    }

    fn many_dialogs(n: usize) -> DialogCorpus {
        let text: String = (0..n)
            .map(|i| format!("1 hi {i}\thello {i}\n\n"))
            .collect();
        DialogCorpus {
            dialogs: parse_babi_text(&text).unwrap(),
            task: DialogTask::Related,
            split: Split::Train,
        }
    }

    #[test]
    fn subsample_full_size_is_identity() {
        let c = many_dialogs(10);
        let s = subsample(&c, 10, &mut Rng::new(0), false).unwrap();
        assert_eq!(s, c);
    }

    #[test]
    fn subsample_too_large_errors() {
        let c = many_dialogs(5);
        assert!(subsample(&c, 6, &mut Rng::new(0), false).is_err());
    }

    #[test]
    fn subsample_seeded_is_stable_and_keeps_dialogs_whole() {
        let c = many_dialogs(100);
        let a = subsample(&c, 30, &mut Rng::new(9), false).unwrap();
        let b = subsample(&c, 30, &mut Rng::new(9), false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dialogs.len(), 30);
        for d in &a.dialogs {
            assert!(c.dialogs.contains(d));
        }
    }

    #[test]
    fn subsample_take_first_is_prefix() {
        let c = many_dialogs(10);
        let s = subsample(&c, 3, &mut Rng::new(0), true).unwrap();
        assert_eq!(s.dialogs, c.dialogs[..3].to_vec());
    }

    #[test]
    fn generated_corpora_reparse_identically() {
        let cfg = SyntheticConfig {
            restaurants_per_cuisine: 3,
            related_train: 20,
            related_valid: 5,
            related_test: 5,
            primary_train: 10,
            primary_valid: 5,
            primary_test: 5,
        };
        let s = generate_synthetic(&cfg, &mut Rng::new(4)).unwrap();
        assert_eq!(s.related_train.dialogs.len(), 20);
        assert_eq!(s.primary_train.dialogs.len(), 10);
        for c in [&s.related_train, &s.primary_train] {
            let emitted = serialize_dialogs(&c.dialogs);
            assert_eq!(parse_babi_text(&emitted).unwrap(), c.dialogs);
        }
        for d in &s.primary_train.dialogs {
            assert!(d.profile.is_some());
        }
        for d in &s.related_train.dialogs {
            assert!(d.profile.is_none());
        }
    }

    #[test]
    fn every_primary_train_answer_in_candidate_set() {
        let cfg = SyntheticConfig {
            restaurants_per_cuisine: 4,
            related_train: 10,
            related_valid: 2,
            related_test: 2,
            primary_train: 30,
            primary_valid: 5,
            primary_test: 5,
        };
        let s = generate_synthetic(&cfg, &mut Rng::new(11)).unwrap();
        let vocab = build_vocab(&[&s.primary_train, &s.related_train]);
        let cands = candidate_set(&s.primary_train, &vocab);
        assert!(extract_examples(&s.primary_train, &vocab, &cands, TaskTag::Primary).is_ok());
    }

    #[test]
    fn vocabularies_overlap_partially_neither_contains_other() {
        let cfg = SyntheticConfig {
            restaurants_per_cuisine: 4,
            related_train: 60,
            related_valid: 2,
            related_test: 2,
            primary_train: 60,
            primary_valid: 2,
            primary_test: 2,
        };
        let s = generate_synthetic(&cfg, &mut Rng::new(5)).unwrap();
        let words = |c: &DialogCorpus| -> HashSet<String> {
            c.dialogs
                .iter()
                .flat_map(|d| {
                    d.profile
                        .iter()
                        .chain(d.turns.iter().map(|t| &t.text))
                        .flat_map(|t| tokenize(t))
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        let rel = words(&s.related_train);
        let pri = words(&s.primary_train);
        assert!(rel.intersection(&pri).count() > 0);
        assert!(rel.difference(&pri).count() > 0, "related has unique words");
        assert!(pri.difference(&rel).count() > 0, "primary has unique words");
    }

    #[test]
    fn suggestion_orderings_disagree_on_some_dialogs() {
        // Reconstruct ratings from KB lines of each primary dialog and
        // check the suggested restaurant is not always the highest rated.
        let cfg = SyntheticConfig {
            restaurants_per_cuisine: 4,
            related_train: 2,
            related_valid: 2,
            related_test: 2,
            primary_train: 200,
            primary_valid: 2,
            primary_test: 2,
        };
        let s = generate_synthetic(&cfg, &mut Rng::new(21)).unwrap();
        let mut disagreements = 0;
        let mut total = 0;
        for d in &s.primary_train.dialogs {
            let mut ratings: Vec<(String, usize)> = Vec::new();
            let mut suggested = None;
            for t in &d.turns {
                match t.speaker {
                    Speaker::Kb => {
                        let parts: Vec<&str> = t.text.split(' ').collect();
                        if parts.len() == 3 && parts[1] == "rating" {
                            ratings.push((parts[0].to_string(), parts[2].parse().unwrap()));
                        }
                    }
                    Speaker::Bot => {
                        let toks: Vec<&str> = t.text.split(' ').collect();
                        if let Some(name) = toks.last() {
                            // First suggestion only; a second-choice turn follows.
                            if name.starts_with("resto_") && suggested.is_none() {
                                suggested = Some(name.to_string());
                            }
                        }
                    }
                    Speaker::User => {}
                }
            }
            let best_rating = ratings.iter().max_by_key(|(_, r)| *r).unwrap().0.clone();
            total += 1;
            if suggested.expect("suggestion present") != best_rating {
                disagreements += 1;
            }
        }
        assert!(total == 200);
        assert!(disagreements > 0, "ordering rules never disagreed");
        assert!(disagreements < total, "ordering rules always disagreed");
    }
}
