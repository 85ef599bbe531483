# -*- coding: utf-8 -*-
#
# ContactInterval documentation build configuration file.

import os
import re
import sys

ROOT = os.path.abspath('../..')
sys.path.insert(0, ROOT)

with open(os.path.join(ROOT, 'contactinterval', '__init__.py')) as v:
    release = re.compile(r'.*__version__ = "(.*?)"', re.S).match(v.read()).group(1)
version = '.'.join(release.split('.')[:2])

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.viewcode']
source_suffix = '.rst'
master_doc = 'index'

project = u'ContactInterval'
copyright = u'2010, Don Bennett'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'default'
htmlhelp_basename = 'ContactIntervaldoc'

man_pages = [
    ('cli', 'contact-interval', u'Relative risk regression on contact intervals',
     [u'Don Bennett'], 1)
]
