//! The frozen replay stores under fixtures/replay. Set UPDATE_FIXTURES=1
//! to re-record them from fixtures/sessions after a prompt or corpus
//! change.

mod common;

use common::*;
use stexquiz_gateway::{ReplayStore, REPLAY_FORMAT};

const SESSIONS: [(&str, &str); 2] = [
    ("arc-consistency-session", "arc-consistency"),
    ("arc-consistency-corrupt", "arc-consistency-corrupt"),
];

#[test]
fn replay_fixtures_match_current_prompt() {
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        for (replay, session) in SESSIONS {
            record_session(replay, session);
        }
    }
    for (replay, _) in SESSIONS {
        let store = ReplayStore::new(replay_dir(replay));
        let hashes = store.hashes().unwrap();
        assert_eq!(
            hashes.len(),
            2,
            "{replay}: run with UPDATE_FIXTURES=1 to record"
        );
        for h in hashes {
            let record = store.get(&h).unwrap().unwrap();
            assert_eq!(record.format, REPLAY_FORMAT);
            assert_eq!(record.exchange.content_hash(), h);
        }
    }
}
