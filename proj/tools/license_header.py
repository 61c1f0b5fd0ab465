#!/usr/bin/env python3
# tools/license_header.py
#
# Copyright 2026  The mtsv Authors
# Licensed under the Apache License, Version 2.0.
"""Prepends the project license header to C++ sources that lack one."""

import pathlib
import sys

HEADER = """// {path}

// Copyright 2026  The mtsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

"""

DIRS = ("include", "src", "tests", "tools")


def main() -> int:
    root = pathlib.Path(__file__).resolve().parent.parent
    changed = 0
    for d in DIRS:
        for f in sorted((root / d).rglob("*")):
            if f.suffix not in (".h", ".cc"):
                continue
            rel = f.relative_to(root).as_posix()
            text = f.read_text()
            if text.startswith("// " + rel + "\n"):
                continue
            f.write_text(HEADER.format(path=rel) + text)
            changed += 1
    print(f"{changed} file(s) updated")
    return 0


if __name__ == "__main__":
    sys.exit(main())
