"""Shared PASS/FAIL ledger for the acceptance suite, printed at session end."""

VERDICTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    VERDICTS[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)
