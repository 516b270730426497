"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS = {}


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    RESULTS[number] = line
    print(line)
    return ok
