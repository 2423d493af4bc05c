import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = []  # (number, title, passed, detail)
ACCEPTANCE_WARNINGS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not ACCEPTANCE_WARNINGS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
    for text in ACCEPTANCE_WARNINGS:
        terminalreporter.write_line(f"[WARN]     {text}")
