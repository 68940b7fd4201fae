from castorette.persist import Journal


def test_append_then_load(tmp_path):
    j = Journal(tmp_path, "t", fsync=False)
    j.append({"op": "a", "v": 1})
    j.append({"op": "b", "v": 2})
    j.close()

    snap, events = Journal(tmp_path, "t", fsync=False).load()
    assert snap is None
    assert [e["op"] for e in events] == ["a", "b"]


def test_snapshot_folds_log(tmp_path):
    j = Journal(tmp_path, "t", fsync=False)
    j.append({"op": "a"})
    j.write_snapshot({"count": 1})
    j.append({"op": "b"})
    j.close()

    snap, events = Journal(tmp_path, "t", fsync=False).load()
    assert snap == {"count": 1}
    assert [e["op"] for e in events] == ["b"]


def test_torn_tail_line_dropped(tmp_path):
    j = Journal(tmp_path, "t", fsync=False)
    j.append({"op": "a"})
    j.close()
    # simulate a crash mid-append
    logs = sorted(tmp_path.glob("t*.log"))
    with logs[-1].open("a") as fh:
        fh.write('{"op": "tr')

    snap, events = Journal(tmp_path, "t", fsync=False).load()
    assert [e["op"] for e in events] == ["a"]


def test_reopen_appends_to_same_stream(tmp_path):
    j = Journal(tmp_path, "t", fsync=False)
    j.append({"n": 1})
    j.close()
    j2 = Journal(tmp_path, "t", fsync=False)
    j2.append({"n": 2})
    j2.close()

    _, events = Journal(tmp_path, "t", fsync=False).load()
    assert [e["n"] for e in events] == [1, 2]
