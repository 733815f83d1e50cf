"""Shared pytest wiring: the per-criterion acceptance summary."""


def pytest_collection_modifyitems(config, items):
    mapping = {}
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            mapping[item.nodeid] = (marker.args[0], str(marker.args[1]))
    config._acceptance_items = mapping


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mapping = getattr(config, "_acceptance_items", {})
    if not mapping:
        return
    verdicts: dict = {}
    labels: dict = {}
    for status, passed in (("passed", True), ("failed", False),
                           ("error", False)):
        for report in terminalreporter.stats.get(status, []):
            info = mapping.get(getattr(report, "nodeid", None))
            if info is None:
                continue
            if passed and getattr(report, "when", "call") != "call":
                continue
            num, label = info
            labels[num] = label
            verdicts[num] = verdicts.get(num, True) and passed
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        word = "PASS" if verdicts[num] else "FAIL"
        terminalreporter.write_line(
            f"acceptance criterion {num}: {word} - {labels[num]}")
