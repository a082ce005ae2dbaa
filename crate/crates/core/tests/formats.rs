use audiomt_core::chat::{self, ChatTurn, Dialogue, Segment};
use audiomt_core::grammar::{
    build_header, default_vocabulary, parse_header, validate, LanguageTag, SpecialTag, TaskCategory, TaskHeader,
    TranscriptionKind, Vocabulary, DEFAULT_LANGUAGES,
};
use audiomt_core::srwt::{decode_timed, encode_timed, quantize_time, TimedTranscript, TimedWord, TIME_QUANTUM};
use audiomt_core::text::learn_text_tokens;
use proptest::prelude::*;

fn byte_vocab() -> Vocabulary {
    default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap()
}

fn merged_vocab() -> Vocabulary {
    let corpus = ["hello world", "the quick brown fox", "hello there", "transcribe the audio"];
    let codes: Vec<String> = DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect();
    Vocabulary::new(&codes, learn_text_tokens(&corpus, 40, 1)).unwrap()
}

fn language() -> impl Strategy<Value = LanguageTag> {
    prop::sample::select(DEFAULT_LANGUAGES.to_vec()).prop_map(LanguageTag::code)
}

fn any_header() -> impl Strategy<Value = TaskHeader> {
    let task = prop_oneof![
        Just(TaskCategory::Transcribe),
        Just(TaskCategory::Translate),
        Just(TaskCategory::Caption),
        Just(TaskCategory::Analysis),
        "[a-z?' ]{1,20}".prop_map(TaskCategory::QuestionAnswer),
    ];
    let audio = prop_oneof![3 => language(), 1 => Just(LanguageTag::Unknown)];
    (audio, task, language(), any::<bool>(), "[a-zA-Z .,é]{0,24}")
        .prop_map(|(audio_language, task, text_language, ts, instruction)| {
            let kind = if matches!(task, TaskCategory::Transcribe | TaskCategory::Translate) {
                TranscriptionKind::Transcripts
            } else {
                TranscriptionKind::Analysis
            };
            let timestamps = ts && task == TaskCategory::Transcribe;
            TaskHeader { kind, audio_language, task, text_language, timestamps, instruction }
        })
}

fn transcript() -> impl Strategy<Value = TimedTranscript> {
    prop::collection::vec(("[a-zA-Z'ü]{1,8}", 0.0f64..0.6, 0.0f64..0.6), 0..20).prop_map(|items| {
        let mut t = 0.0;
        let words = items
            .into_iter()
            .map(|(w, gap, dur)| {
                let start = t + gap;
                let end = start + dur;
                t = end;
                TimedWord::new(w, start, end)
            })
            .take_while(|w| w.end <= 30.0)
            .collect();
        TimedTranscript::new(words)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn header_build_parse_identity(h in any_header(), body in "[a-z ]{0,30}", eot in any::<bool>()) {
        for vocab in [byte_vocab(), merged_vocab()] {
            prop_assert!(validate(&h).is_empty());
            let mut tokens = build_header(&h, &vocab).unwrap().into_inner();
            let mut rest = vocab.encode_text(&body);
            if eot {
                rest.push(vocab.special(SpecialTag::EndOfText));
            }
            tokens.extend(&rest);
            let (parsed, remainder) = parse_header(&tokens, &vocab).unwrap();
            prop_assert_eq!(&parsed, &h);
            prop_assert_eq!(remainder.into_inner(), rest);
        }
    }

    #[test]
    fn srwt_round_trip_within_half_quantum(t in transcript()) {
        let vocab = merged_vocab();
        let tokens = encode_timed(&t, &vocab).unwrap();
        prop_assert_eq!(tokens.len(), t.words.iter().map(|w| vocab.encode_text(&w.word).len() + 2).sum::<usize>());
        let back = decode_timed(&tokens, &vocab).unwrap();
        prop_assert_eq!(back.words.len(), t.words.len());
        for (a, b) in back.words.iter().zip(&t.words) {
            prop_assert_eq!(&a.word, &b.word);
            prop_assert!((a.start - b.start).abs() <= TIME_QUANTUM / 2.0 + 1e-9);
            prop_assert!((a.end - b.end).abs() <= TIME_QUANTUM / 2.0 + 1e-9);
        }
        prop_assert!(back.validate().is_ok());
    }

    #[test]
    fn quantize_is_monotone(a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize_time(lo).unwrap() <= quantize_time(hi).unwrap());
    }

    #[test]
    fn chat_render_parse_identity(
        turns in prop::collection::vec(
            prop::collection::vec(prop_oneof![
                "[a-zA-Z ?.!\n]{1,20}".prop_map(Segment::Text),
                "[a-z0-9/_]{1,12}\\.wav".prop_map(Segment::Audio),
            ], 0..4),
            0..6,
        ),
        replies in prop::collection::vec("[a-zA-Z .\n]{0,20}", 6),
    ) {
        let vocab = merged_vocab();
        let mut list = Vec::new();
        for (segs, reply) in turns.into_iter().zip(replies) {
            list.push(ChatTurn::user(segs));
            list.push(ChatTurn::assistant(reply));
        }
        let d = Dialogue::new(list).unwrap();
        let (tokens, mask) = chat::render(&d, &vocab);
        prop_assert_eq!(tokens.len(), mask.len());
        let back = chat::parse(&tokens, &vocab).unwrap();
        prop_assert_eq!(back.audio_refs().collect::<Vec<_>>(), d.audio_refs().collect::<Vec<_>>());
        prop_assert_eq!(back, d);
    }
}

#[test]
fn srwt_rejects_any_single_token_corruption_or_recovers_valid_transcript() {
    let vocab = byte_vocab();
    let t = TimedTranscript::new(vec![TimedWord::new("ab", 0.0, 0.4), TimedWord::new("c", 0.44, 0.8)]);
    let tokens = encode_timed(&t, &vocab).unwrap().into_inner();
    for i in 0..tokens.len() {
        for replacement in [vocab.time(0), vocab.time(750), vocab.encode_text("x")[0], vocab.special(SpecialTag::Caption)] {
            let mut bad = tokens.clone();
            bad[i] = replacement;
            if let Ok(d) = decode_timed(&bad, &vocab) {
                assert!(d.validate().is_ok(), "decoded an invalid transcript from {bad:?}");
            }
        }
    }
}
