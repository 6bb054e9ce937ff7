mod common;

use armsbm::io::{parse_config, parse_edge_list, read_dmts, write_dmts, write_edge_list, NodeMap};
use armsbm::Error;
use common::random_series;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dmts_round_trip_is_bit_exact(seed in any::<u64>(), n in 2usize..12, layers in 1usize..4, t_max in 1usize..20) {
        let snaps = random_series(seed, n, layers, t_max);
        let mut bytes = Vec::new();
        write_dmts(&mut bytes, &snaps).unwrap();
        let back = read_dmts(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &snaps);
        let mut again = Vec::new();
        write_dmts(&mut again, &back).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), n in 2usize..10, layers in 1usize..3, t_max in 1usize..12) {
        let snaps = random_series(seed, n, layers, t_max);
        let mut text = Vec::new();
        write_edge_list(&mut text, &snaps).unwrap();
        let back = parse_edge_list(text.as_slice(), n, layers, snaps.len(), None).unwrap();
        prop_assert_eq!(back, snaps);
    }

    #[test]
    fn truncated_dmts_is_rejected(seed in any::<u64>(), cut in 1usize..40) {
        let snaps = random_series(seed, 6, 2, 5);
        let mut bytes = Vec::new();
        write_dmts(&mut bytes, &snaps).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(read_dmts(&bytes[..keep]).is_err());
    }
}

#[test]
fn bad_magic_is_a_parse_error() {
    let snaps = random_series(3, 4, 1, 3);
    let mut bytes = Vec::new();
    write_dmts(&mut bytes, &snaps).unwrap();
    bytes[0] = b'X';
    let err = read_dmts(bytes.as_slice()).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn edge_list_errors_carry_line_numbers() {
    let text = "t,i,j,l\n1,1,2,1\n2,3,3,1\n";
    let err = parse_edge_list(text.as_bytes(), 4, 1, 2, None).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = parse_edge_list("1,1,9,1\n".as_bytes(), 4, 1, 2, None).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[test]
fn labelled_edges_use_the_node_map() {
    let map = NodeMap::parse("alice,1\nbob,2\ncarol,3\n".as_bytes()).unwrap();
    let snaps = parse_edge_list("t,i,j,l\n1,alice,carol,2\n".as_bytes(), 3, 2, 1, Some(&map)).unwrap();
    assert!(snaps[0].get(0, 2, 1) && snaps[0].get(2, 0, 1));
    assert_eq!(snaps[0].bits().iter().filter(|&&b| b != 0).count(), 2);
    assert!(parse_edge_list("1,alice,dave,1\n".as_bytes(), 3, 1, 1, Some(&map)).is_err());
}

#[test]
fn config_later_keys_win() {
    let map = parse_config("# comment\nreps = 3\nseed=4 # trailing\nreps=5\n").unwrap();
    assert_eq!(map.get("reps").map(String::as_str), Some("5"));
    assert_eq!(map.get("seed").map(String::as_str), Some("4"));
}
