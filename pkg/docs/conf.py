#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# thinphase documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from thinphase.version import __version__  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx-prompt',
]

source_suffix = '.rst'
master_doc = 'index'

project = 'thinphase'
copyright = '2026, thinphase developers'
author = 'thinphase developers'

# The short X.Y version and the full release string.
version = '.'.join(__version__.split('.')[:2])
release = __version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
htmlhelp_basename = 'thinphasedoc'

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'thinphase', 'thinphase Documentation', [author], 1),
]
