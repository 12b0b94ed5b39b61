"""Administrative command line.

All subcommands operate directly on the node state named by --config.
`serve` runs the HTTP gateway and DIMSE listener; the other commands are
for offline administration (first-user bootstrap, offline extension
installs, federation pairing). A running server picks up users, links,
and extension workflows immediately because those live in the shared
database; operators contributed by a CLI-side extension install register
in a running server only after its restart.
"""
from __future__ import annotations

import argparse
import getpass
import json
import logging
import sys
import time
from pathlib import Path

from .config import load_config
from .node import ResearchNode


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirnode",
        description="desk-scale imaging research node")
    parser.add_argument("--config", default="node.json",
                        help="path to the node config JSON"
                             " (default: ./node.json)")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("serve", help="run the HTTP and DIMSE servers")

    user = commands.add_parser("user", help="manage principals")
    user_commands = user.add_subparsers(dest="user_command", required=True)
    user_add = user_commands.add_parser("add", help="create a principal")
    user_add.add_argument("username")
    user_add.add_argument("--role", action="append", required=True,
                          choices=["admin", "researcher", "viewer"],
                          help="may be given multiple times")
    user_add.add_argument("--password-stdin", action="store_true",
                          help="read the password from stdin instead of"
                               " prompting")

    extension = commands.add_parser("extension", help="manage extensions")
    ext_commands = extension.add_subparsers(dest="extension_command",
                                            required=True)
    ext_install = ext_commands.add_parser("install",
                                          help="install a package archive")
    ext_install.add_argument("file", help="path to a .tar.gz package archive")

    fed = commands.add_parser("fed", help="manage federation")
    fed_commands = fed.add_subparsers(dest="fed_command", required=True)
    fed_commands.add_parser("invite",
                            help="issue a one-time pairing invite token")
    fed_link = fed_commands.add_parser(
        "link", help="pair with a remote node using its invite token")
    fed_link.add_argument("endpoint", help="remote base URL,"
                                           " e.g. http://peer:8080")
    fed_link.add_argument("token", help="invite token issued by the peer")

    return parser


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _read_password(args) -> str:
    if args.password_stdin:
        password = sys.stdin.readline().rstrip("\n")
        if not password:
            raise SystemExit("empty password on stdin")
        return password
    first = getpass.getpass("password: ")
    second = getpass.getpass("repeat password: ")
    if first != second:
        raise SystemExit("passwords do not match")
    return first


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s")

    config_path = Path(args.config)
    if not config_path.exists():
        print(f"config file {config_path} not found", file=sys.stderr)
        return 2
    try:
        config = load_config(config_path)
    except ValueError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 2

    node = ResearchNode(config)
    try:
        return _run(node, args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        if args.command != "serve":
            node.db.close()


def _run(node: ResearchNode, args) -> int:
    if args.command == "serve":
        node.start()
        print(f"listening: http://{node.config.http_host}:{node.http_port}"
              f" dimse={node.dimse_port} ae={node.config.ae_title}")
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
        finally:
            node.stop()
        return 0

    if args.command == "user" and args.user_command == "add":
        password = _read_password(args)
        principal = node.users.add_user(args.username, password,
                                        set(args.role))
        node.audit.append("system", "manage_users",
                          f"cli:user add {args.username}", "allowed")
        _emit(principal.to_public_json())
        return 0

    if args.command == "extension" and args.extension_command == "install":
        data = Path(args.file).read_bytes()
        records = node.extensions.install_upload(data)
        node.audit.append("system", "manage_extensions",
                          f"cli:extension install {Path(args.file).name}",
                          "allowed")
        _emit({"installed": [record.to_json() for record in records]})
        return 0

    if args.command == "fed" and args.fed_command == "invite":
        token = node.federation.issue_invite()
        node.audit.append("system", "manage_federation", "cli:fed invite",
                          "allowed")
        _emit({"invite_token": token})
        return 0

    if args.command == "fed" and args.fed_command == "link":
        link = node.federation.link_to(args.endpoint, args.token)
        node.audit.append("system", "manage_federation",
                          f"cli:fed link {args.endpoint}", "allowed")
        _emit(link.to_public_json())
        return 0

    raise SystemExit(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
