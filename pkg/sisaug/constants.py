"""
sisaug.constants

licence: https://opensource.org/licenses/MIT
"""


VERSION = '0.3'
TOOL_NAME = f'sisaug v{VERSION}'

# version of the JSON manifests, metric tables and bias splits we write
SCHEMA_VERSION = 1

# conventional ignore id for unlabelled pixels in 8-bit label maps
IGNORE_ID = 255
