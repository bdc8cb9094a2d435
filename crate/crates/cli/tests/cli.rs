use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn cfsig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfsig"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sign(tmp: &Path, fixture: &str, extra: &[&str]) -> PathBuf {
    let dest = tmp.join(format!("{fixture}.sig"));
    let src = fixtures().join(fixture);
    let mut args = vec!["sign", path(&src), "-o", path(&dest)];
    args.extend_from_slice(extra);
    let out = cfsig(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dest
}

#[test]
fn sign_writes_one_digest_for_diamond() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cfsig(&[
        "sign",
        path(&fixtures().join("diamond.dot")),
        "-o",
        path(&tmp.path().join("d.sig")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("(1 digest)"));
    let text = fs::read_to_string(tmp.path().join("d.sig")).unwrap();
    assert_eq!(
        text,
        "cfsig/1\nalg:MD5\nlabel:diamond\ncount:1\n53fd392af70a1e4186cc69528111f2ca\n"
    );
}

#[test]
fn sign_sha256_gives_long_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let sig = sign(tmp.path(), "diamond.dot", &["--alg", "sha256"]);
    let text = fs::read_to_string(sig).unwrap();
    assert_eq!(text.lines().last().unwrap().len(), 64);
}

#[test]
fn sign_rejects_bad_input() {
    let out = cfsig(&["sign", path(&fixtures().join("broken.dot"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error at 2:9"));
    let out = cfsig(&["sign", path(&fixtures().join("unreachable.dot"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnreachableNode(B9)"));
}

#[test]
fn sign_prune_accepts_unreachable_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    sign(tmp.path(), "unreachable.dot", &["--prune"]);
}

#[test]
fn match_reports_verdicts_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = sign(tmp.path(), "diamond.dot", &[]);
    let b = sign(tmp.path(), "loop.dot", &["--label", "diamond"]);
    let same = cfsig(&["match", path(&a), path(&a)]);
    assert_eq!((code(&same), stdout(&same).trim()), (0, "MATCH"));
    let diff = cfsig(&["match", path(&a), path(&b)]);
    assert_eq!(code(&diff), 2);
    assert!(stdout(&diff).starts_with("MISMATCH MissingDigest("));
    let junk = tmp.path().join("junk.sig");
    fs::write(&junk, "not a signature\n").unwrap();
    assert_eq!(code(&cfsig(&["match", path(&a), path(&junk)])), 3);
}

#[test]
fn simulate_prints_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, verdict, exit) in [
        ("clean3", "CLEAN", 0),
        ("tamper3", "INTRUSION node=1", 2),
        ("conflict2", "INCONCLUSIVE", 2),
    ] {
        let transcript = tmp.path().join(format!("{name}.transcript"));
        let out = cfsig(&[
            "simulate",
            path(&fixtures().join(format!("{name}.scenario"))),
            "--transcript",
            path(&transcript),
        ]);
        assert_eq!((code(&out), stdout(&out).trim()), (exit, verdict), "{name}");
        assert!(fs::read_to_string(transcript)
            .unwrap()
            .starts_with("cfsig-transcript/1\n"));
    }
}

#[test]
fn global_flags_override_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let transcript = tmp.path().join("t");
    let out = cfsig(&[
        "--alg",
        "sha1",
        "--cipher",
        "xor",
        "--key",
        "99",
        "simulate",
        path(&fixtures().join("clean3.scenario")),
        "--transcript",
        path(&transcript),
    ]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(transcript)
        .unwrap()
        .contains("alg=SHA1 cipher=xor"));
}

#[test]
fn simulate_scenario_errors_exit_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        "n=3\nfixture=nosuchfixture\n",
        "n=1\nfixture=diamond\n",
        "n=3\nfixture=diamond\ntamper=1:remove:B1>B9\n",
        "garbage\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = tmp.path().join(format!("s{i}.scenario"));
        fs::write(&p, text).unwrap();
        let out = cfsig(&["simulate", path(&p), "--fixtures", path(&fixtures())]);
        assert_eq!(code(&out), 4, "{text:?}");
    }
}

#[test]
fn bench_on_empty_corpus_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&cfsig(&["bench", path(tmp.path())])), 5);
}

#[test]
fn bench_without_reference_omits_overhead() {
    let tmp = tempfile::tempdir().unwrap();
    fs::copy(
        fixtures().join("diamond.dot"),
        tmp.path().join("diamond.dot"),
    )
    .unwrap();
    let out = cfsig(&[
        "bench",
        path(tmp.path()),
        "--csv",
        path(&tmp.path().join("r.csv")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("overhead%"));
    let csv = fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",,"));
}

#[test]
fn oracle_reports_counts() {
    let out = cfsig(&["oracle", path(&fixtures().join("complete3.dot"))]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("arborescences=3\n"));
    assert!(text.contains("peel=1\n"));
    assert!(text.contains("max_packing=2\n"));
    assert!(text.ends_with("consistent\n"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&cfsig(&["sign"])), 1);
    assert_eq!(code(&cfsig(&["--alg", "crc32", "oracle", "x.dot"])), 1);
    assert_eq!(code(&cfsig(&["--help"])), 0);
}

#[test]
fn generate_reproduces_shipped_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&cfsig(&["generate", path(tmp.path())])), 0);
    for entry in fs::read_dir(fixtures().join("corpus")).unwrap() {
        let p = entry.unwrap().path();
        let fresh = fs::read_to_string(tmp.path().join(p.file_name().unwrap())).unwrap();
        assert_eq!(fresh, fs::read_to_string(&p).unwrap(), "{}", p.display());
    }
}
