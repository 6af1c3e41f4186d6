import argparse
import logging
import sys

import commands
import config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ArgumentParser(argparse.ArgumentParser):
    # usage errors exit with status 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = ArgumentParser(description="Detect, classify and evaluate reading miscues in read-aloud transcripts.")
    parser.add_argument('--config', '-c', help="JSON run configuration; flags override its values.")
    parser.add_argument('--corpus', help="Corpus JSON file.")
    parser.add_argument('--model', '-m', action="append", dest="models",
                        help="Model key to process, may be repeated. Defaults to every model in the corpus.")
    parser.add_argument('--out', '-o', help="Output directory.")
    parser.add_argument('--embeddings', help="Word embeddings in word2vec text format.")
    parser.add_argument('--phoneme-map', dest="phoneme_map", help="IPA to CGN phoneme mapping table.")
    parser.add_argument('--top-k', dest="top_k", type=int, help="Rows per confusion table.")
    parser.add_argument('--seed', type=int, help="Seed of the injection harness.")
    parser.add_argument('--jobs', '-j', type=int, help="Records processed in parallel.")
    parser.add_argument('--verbose', '-v', default=False, action="store_true", help="Log debug messages.")
    parser.add_argument('--quiet', '-q', default=False, action="store_true", help="Only log warnings and errors.")

    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    subparsers.add_parser('detect', help="Align prompts with hypotheses and references and extract reading errors.")
    subparsers.add_parser('classify', help="Label extracted errors with miscue categories.")

    evaluate = subparsers.add_parser('evaluate', help="Score predicted errors and miscues against the references.")
    evaluate.add_argument('--analyses', nargs='*', choices=config.ANALYSES,
                          help="Optional analyses that need extra annotations.")
    evaluate.add_argument('--formats', nargs='+', choices=config.FORMATS, help="Report formats to write.")
    evaluate.add_argument('--level', dest="confusion_level", choices=config.CONFUSION_LEVELS,
                          help="Token level of the confusion tables.")
    evaluate.add_argument('--degrade', dest="missing_embeddings", action="store_const", const="degrade",
                          help="Without embeddings, label non-orthographic substitutions O instead of failing.")

    confusions = subparsers.add_parser('confusions', help="Rank the most frequent recognition errors.")
    confusions.add_argument('--level', dest="confusion_level", choices=config.CONFUSION_LEVELS,
                            help="Token level of the confusion tables.")

    subparsers.add_parser('inject', help="Write a synthetic corpus with injected miscues and its ground truth.")

    normalize = subparsers.add_parser('normalize', help="Normalize text (or map IPA phonemes) from --text or stdin.")
    normalize.add_argument('--text', '-t', nargs='*', help="Input strings; stdin lines when omitted.")
    normalize.add_argument('--phonemes', default=False, action="store_true",
                           help="Treat input as IPA phoneme strings and map them to CGN.")

    for sub in (subparsers.choices['detect'], subparsers.choices['classify']):
        sub.add_argument('--degrade', dest="missing_embeddings", action="store_const", const="degrade",
                         help="Without embeddings, label non-orthographic substitutions O instead of failing.")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    overrides = {key: getattr(args, key, None) for key in
                 ("corpus", "models", "out", "embeddings", "phoneme_map", "top_k", "seed", "jobs", "analyses",
                  "formats", "confusion_level", "missing_embeddings")}
    try:
        run_config = config.load(args.config, overrides)
        if args.command == "normalize":
            return commands.cmd_normalize(run_config, args.text, args.phonemes)
        return commands.COMMANDS[args.command](run_config)
    except config.ConfigError as e:
        logger.error(e.message)
        return EXIT_USAGE
    except commands.DATA_ERRORS as e:
        logger.error(getattr(e, 'message', None) or str(e))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
