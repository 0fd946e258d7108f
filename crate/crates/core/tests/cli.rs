mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;

use common::{dump_array, entity_json, run_cli, CITY, HUMAN};

fn write_dump(dir: &Path, entities: &[String]) {
    let mut lines = common::class_lines();
    lines.extend_from_slice(entities);
    fs::write(dir.join("dump.json"), dump_array(&lines)).unwrap();
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run_cli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(dir: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(dir.join("work/run_manifest.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn clean_strips_disambiguator() {
    let tmp = tempfile::tempdir().unwrap();
    write_dump(
        tmp.path(),
        &[entity_json(
            900,
            &[("en", "Wang Lina (boxer)"), ("zh", "王丽娜 (拳击运动员)")],
            &[HUMAN],
            &[],
        )],
    );
    for stage in ["ingest", "build-store", "typeinfer", "clean"] {
        ok(tmp.path(), &[stage]);
    }
    let cleaned = fs::read_to_string(tmp.path().join("work/cleaned.jsonl")).unwrap();
    assert!(cleaned.contains("\"Wang Lina\""), "{cleaned}");
    assert!(cleaned.contains("\"王丽娜\""), "{cleaned}");
    assert!(!cleaned.contains("boxer"));
}

#[test]
fn empty_dump_gives_header_only_resource() {
    let tmp = tempfile::tempdir().unwrap();
    write_dump(tmp.path(), &[]);
    ok(tmp.path(), &["all"]);
    for f in ["all_names.tsv", "per_names.tsv", "loc_names.tsv", "org_names.tsv"] {
        let text = fs::read_to_string(tmp.path().join("output").join(f)).unwrap();
        assert_eq!(text, format!("{}\n", namebank::emit::RESOURCE_HEADER), "{f}");
    }
    let stages: Vec<String> = manifest(tmp.path())
        .iter()
        .map(|m| m["stage"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(stages.len(), 7);
    assert_eq!(stages.first().map(String::as_str), Some("ingest"));
    assert_eq!(stages.last().map(String::as_str), Some("emit"));
}

#[test]
fn reorder_is_stable_on_its_own_output() {
    let tmp = tempfile::tempdir().unwrap();
    write_dump(
        tmp.path(),
        &[
            entity_json(901, &[("en", "Joe Biden"), ("ru", "Байден Джо"), ("uk", "Джо Байден")], &[HUMAN], &[]),
            entity_json(902, &[("en", "Ivan Petrov"), ("bg", "Петров Иван"), ("ru", "Иван Петров")], &[HUMAN], &[]),
            entity_json(903, &[("en", "Kazan"), ("ru", "Казань")], &[CITY], &[]),
        ],
    );
    ok(tmp.path(), &["all"]);
    let first = manifest(tmp.path());
    let reorder = first.iter().find(|m| m["stage"] == "reorder").unwrap();
    assert_eq!(reorder["counters"]["reordered"], 2);
    assert_eq!(reorder["counters"]["evaluated"], 4);

    let work = tmp.path().join("work");
    fs::copy(work.join("reordered.jsonl"), work.join("filtered.jsonl")).unwrap();
    ok(tmp.path(), &["reorder"]);
    let second = manifest(tmp.path());
    let last = second.last().unwrap();
    assert_eq!(last["stage"], "reorder");
    assert_eq!(last["counters"]["reordered"], 0);

    let per = fs::read_to_string(tmp.path().join("output/per_names.tsv")).unwrap();
    assert!(per.contains("Q901\tJoe Biden\tДжо Байден\tru\tPER"), "{per}");
}

#[test]
fn manifest_records_hashes_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_dump(tmp.path(), &[entity_json(904, &[("en", "Omsk"), ("ru", "Омск")], &[CITY], &[])]);
    ok(tmp.path(), &["ingest"]);
    let m = manifest(tmp.path());
    assert_eq!(m.len(), 1);
    let line = &m[0];
    assert_eq!(line["stage"], "ingest");
    assert!(line["wall_time_ms"].is_u64());
    assert!(line["started_unix_ms"].is_u64());
    let outputs = line["outputs"].as_object().unwrap();
    assert_eq!(outputs.len(), 1);
    let (path, hash) = outputs.iter().next().unwrap();
    assert!(path.ends_with("entities.jsonl"));
    assert_eq!(hash.as_str().unwrap(), common::sha256(&tmp.path().join("work/entities.jsonl")));
    assert!(line["config"]["paths"].is_object());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[paths]\nnonsense = 1\n").unwrap();
    let out = run_cli(tmp.path(), &["--config", "bad.toml", "ingest"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_cli(tmp.path(), &["ingest", "--max-tokens", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_cli(tmp.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_cli(tmp.path(), &["clean"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_cli(tmp.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2), "missing dump");
}

#[test]
fn config_file_paths_are_relative_to_it() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("project");
    fs::create_dir_all(&sub).unwrap();
    write_dump(
        &sub,
        &[
            entity_json(905, &[("en", "Tver"), ("ru", "Тверь")], &[CITY], &[]),
            entity_json(908, &[("en", "Omsk"), ("ru", "Омск")], &[CITY], &[]),
        ],
    );
    fs::write(sub.join("run.toml"), "[paths]\ndump = \"dump.json\"\noutput = \"res\"\n").unwrap();
    ok(tmp.path(), &["--config", "project/run.toml", "all"]);
    let loc = fs::read_to_string(sub.join("res/loc_names.tsv")).unwrap();
    assert!(loc.contains("Q905\tTver\tТверь\tru\tLOC"), "{loc}");
}

#[test]
fn stats_computes_mca_from_alignments() {
    let tmp = tempfile::tempdir().unwrap();
    write_dump(
        tmp.path(),
        &[
            entity_json(906, &[("en", "Anna Orlova"), ("ru", "Орлова Анна"), ("uk", "Анна Орлова")], &[HUMAN], &[]),
            entity_json(907, &[("en", "Oleg Popov"), ("ru", "Олег Попов")], &[HUMAN], &[]),
        ],
    );
    for stage in ["ingest", "build-store", "typeinfer", "clean", "filter-scripts", "stats"] {
        ok(tmp.path(), &[stage]);
    }
    let work = tmp.path().join("work");
    let bitext = fs::read_to_string(work.join("bitext.txt")).unwrap();
    assert_eq!(bitext.lines().count(), 3, "{bitext}");
    let alignments: String = bitext
        .lines()
        .map(|l| if l.starts_with("Орлова") { "0-1 1-0\n" } else { "0-0 1-1\n" })
        .collect();
    fs::write(tmp.path().join("align.txt"), alignments).unwrap();
    ok(tmp.path(), &["stats", "--alignments", "align.txt"]);
    let mca = fs::read_to_string(work.join("mca.tsv")).unwrap();
    let rows: Vec<&str> = mca.lines().collect();
    assert_eq!(rows[0], namebank::align::MCA_HEADER);
    assert!(rows.contains(&"ru\t2\t0.500000\t0"), "{mca}");
    assert!(rows.contains(&"uk\t1\t0.000000\t0"), "{mca}");
    assert!(work.join("mca_histogram.tsv").exists());

    fs::write(tmp.path().join("short.txt"), "0-0\n").unwrap();
    let out = run_cli(tmp.path(), &["stats", "--alignments", "short.txt"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_scores_bundled_gold() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["evaluate"]);
    let text = fs::read_to_string(tmp.path().join("work/evaluation.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0].join("\t"), namebank::align::SCORES_HEADER);
    let none = rows.iter().find(|r| r[0] == "none").unwrap();
    let ours = rows.iter().find(|r| r[0] == "edit_distance").unwrap();
    assert_eq!(none[5], "0.0");
    assert_eq!(ours[2], "100.0");
}

fn serve_once(body: String) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            if h == "\r\n" || h.is_empty() {
                break;
            }
        }
        write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        stream.flush().unwrap();
        let _ = reader.read_to_end(&mut Vec::new());
        request_line
    });
    (format!("http://{addr}/entity"), handle)
}

#[test]
fn fetch_from_local_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let entity = entity_json(42, &[("en", "Douglas Adams"), ("ru", "Дуглас Адамс")], &[HUMAN], &[]);
    let (endpoint, server) = serve_once(format!("{{\"entities\":{{\"Q42\":{entity}}}}}"));
    let out = std::process::Command::new(common::namebank_bin())
        .args(["fetch", "Q42", "-O", "q42.jsonl"])
        .current_dir(tmp.path())
        .env("NAMEBANK_WIKIDATA_ENDPOINT", &endpoint)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let request = server.join().unwrap();
    assert!(request.starts_with("GET /entity/Q42.json "), "{request}");
    let text = fs::read_to_string(tmp.path().join("q42.jsonl")).unwrap();
    let record = namebank::EntityRecord::from_canonical_json(text.trim()).unwrap();
    assert_eq!(record.qid.to_string(), "Q42");
    assert_eq!(record.labels.len(), 2);
}

#[test]
fn fetch_rejects_bad_id_without_network() {
    let tmp = tempfile::tempdir().unwrap();
    let out = std::process::Command::new(common::namebank_bin())
        .args(["fetch", "Paris"])
        .current_dir(tmp.path())
        .env("NAMEBANK_WIKIDATA_ENDPOINT", "http://127.0.0.1:9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
