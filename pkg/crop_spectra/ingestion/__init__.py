# Library ingestion: CSV loader/writer and synthetic generators
