"""Fixed English stop-word list, version 1.

The list is frozen: changing it changes every vocabulary and therefore every
downstream result, so additions require a version bump.
"""

STOP_WORDS_VERSION = "1"

STOP_WORDS = frozenset("""
a about above after again against all am an and any are aren arent as at
be because been before being below between both but by
can cannot cant could couldn couldnt
did didn didnt do does doesn doesnt doing don dont down during
each
few for from further
had hadn hadnt has hasn hasnt have haven havent having he her here hers
herself him himself his how
i if in into is isn isnt it its itself
just
let lets
me more most mustn mustnt my myself
no nor not now
of off on once only or other ought our ours ourselves out over own
same shan shant she should shouldn shouldnt so some such
than that the their theirs them themselves then there these they this those
through to too
under until up upon us
very
was wasn wasnt we were weren werent what when where which while who whom why
will with won wont would wouldn wouldnt
you your yours yourself yourselves
""".split())
